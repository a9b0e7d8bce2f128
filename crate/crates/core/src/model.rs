//! Trainable classifier: softmax regression with an optional single
//! hidden tanh layer, plus SGD local training, parameter sizing, and
//! weighted model averaging.
//!
//! Parameters live in a flat vector; the layout records one
//! (name, rows, cols) entry per layer so the same vector type carries
//! both model families.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::Sample;
use crate::error::{Error, Result};

/// Shape record for one named layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerShape {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

impl LayerShape {
    fn new(name: &str, rows: usize, cols: usize) -> Self {
        Self { name: name.to_string(), rows, cols }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }
}

/// Flat model parameters plus shape metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: Vec<LayerShape>,
    /// Bytes per scalar of the simulated payload (4 models an f32 wire format).
    pub dtype_bytes: u32,
}

impl ParamVector {
    pub fn scalar_count(&self) -> usize {
        self.layout.iter().map(|s| s.len()).sum()
    }

    fn check_finite(self, op: &str) -> Result<Self> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(self)
        } else {
            Err(Error::NonFinite(format!("{op} produced a non-finite parameter")))
        }
    }
}

/// Gradient of the loss with respect to a [`ParamVector`]; same layout.
#[derive(Debug, Clone)]
pub struct GradVector {
    pub values: Vec<f64>,
    pub layout: Vec<LayerShape>,
}

/// Local-training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub lr: f64,
    pub batch_size: usize,
    pub local_epochs: usize,
}

impl Hyperparams {
    pub fn new(lr: f64, batch_size: usize, local_epochs: usize) -> Result<Self> {
        if !(lr > 0.0) || !lr.is_finite() {
            return Err(Error::InvalidInput(format!("lr must be positive, got {lr}")));
        }
        if batch_size < 1 {
            return Err(Error::InvalidInput("batch_size must be >= 1".into()));
        }
        if local_epochs < 1 {
            return Err(Error::InvalidInput("local_epochs must be >= 1".into()));
        }
        Ok(Self { lr, batch_size, local_epochs })
    }
}

/// Dimensions recovered from a layout.
struct Dims {
    input_dim: usize,
    num_classes: usize,
    hidden: Option<usize>,
}

fn dims_of(layout: &[LayerShape]) -> Result<Dims> {
    match layout {
        [w, b] if b.cols == 1 && b.rows == w.rows => Ok(Dims {
            input_dim: w.cols,
            num_classes: w.rows,
            hidden: None,
        }),
        [w1, b1, w2, b2]
            if b1.cols == 1 && b2.cols == 1 && b1.rows == w1.rows && b2.rows == w2.rows
                && w2.cols == w1.rows =>
        {
            Ok(Dims { input_dim: w1.cols, num_classes: w2.rows, hidden: Some(w1.rows) })
        }
        _ => Err(Error::InvalidInput("unrecognized parameter layout".into())),
    }
}

/// Mibibyte-to-byte conversion used for payload overrides (1 MB = 2^20 bytes).
pub fn mb_to_bytes(mb: f64) -> u64 {
    (mb * 1_048_576.0).round() as u64
}

/// Initializes a model deterministically from `seed`.
///
/// Weights are drawn from Normal(0, 1/fan_in) (scale 1/sqrt(fan_in));
/// biases start at zero.
pub fn init_model(
    seed: u64,
    input_dim: usize,
    num_classes: usize,
    hidden: Option<usize>,
) -> Result<ParamVector> {
    if input_dim < 1 {
        return Err(Error::InvalidInput("input_dim must be >= 1".into()));
    }
    if num_classes < 2 {
        return Err(Error::InvalidInput("num_classes must be >= 2".into()));
    }
    if hidden == Some(0) {
        return Err(Error::InvalidInput("hidden must be absent rather than 0".into()));
    }

    let layout = match hidden {
        None => vec![
            LayerShape::new("W", num_classes, input_dim),
            LayerShape::new("b", num_classes, 1),
        ],
        Some(h) => vec![
            LayerShape::new("W1", h, input_dim),
            LayerShape::new("b1", h, 1),
            LayerShape::new("W2", num_classes, h),
            LayerShape::new("b2", num_classes, 1),
        ],
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(layout.iter().map(LayerShape::len).sum());
    for shape in &layout {
        if shape.cols == 1 {
            values.extend(std::iter::repeat(0.0).take(shape.len()));
        } else {
            let fan_in = shape.cols as f64;
            let normal = Normal::new(0.0, 1.0 / fan_in.sqrt()).expect("valid stddev");
            values.extend((0..shape.len()).map(|_| normal.sample(&mut rng)));
        }
    }

    ParamVector { values, layout, dtype_bytes: 4 }.check_finite("init_model")
}

/// Per-sample logits. `out` must hold `num_classes` slots.
fn logits_into(params: &ParamVector, dims: &Dims, features: &[f64], out: &mut [f64]) {
    let d = dims.input_dim;
    let c = dims.num_classes;
    let v = &params.values;
    match dims.hidden {
        None => {
            for k in 0..c {
                let row = &v[k * d..(k + 1) * d];
                let mut z = v[c * d + k];
                for (w, x) in row.iter().zip(features) {
                    z += w * x;
                }
                out[k] = z;
            }
        }
        Some(h) => {
            let w1 = &v[0..h * d];
            let b1 = &v[h * d..h * d + h];
            let w2 = &v[h * d + h..h * d + h + c * h];
            let b2 = &v[h * d + h + c * h..];
            let mut act = vec![0.0; h];
            for (j, a) in act.iter_mut().enumerate() {
                let mut z = b1[j];
                for (w, x) in w1[j * d..(j + 1) * d].iter().zip(features) {
                    z += w * x;
                }
                *a = z.tanh();
            }
            for k in 0..c {
                let mut z = b2[k];
                for (w, a) in w2[k * h..(k + 1) * h].iter().zip(&act) {
                    z += w * a;
                }
                out[k] = z;
            }
        }
    }
}

fn check_batch(dims: &Dims, batch: &[&Sample]) -> Result<()> {
    for s in batch {
        if s.features.len() != dims.input_dim {
            return Err(Error::InvalidInput(format!(
                "feature dimension {} does not match model input_dim {}",
                s.features.len(),
                dims.input_dim
            )));
        }
        if s.label >= dims.num_classes {
            return Err(Error::InvalidInput(format!(
                "label {} out of range for {} classes",
                s.label, dims.num_classes
            )));
        }
    }
    Ok(())
}

fn forward_loss_refs(params: &ParamVector, batch: &[&Sample]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let dims = dims_of(&params.layout)?;
    check_batch(&dims, batch)?;
    let c = dims.num_classes;
    let mut logits = vec![0.0; c];
    let mut total = 0.0;
    for s in batch {
        logits_into(params, &dims, &s.features, &mut logits);
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        total += lse - logits[s.label];
    }
    let loss = total / batch.len() as f64;
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFinite("forward_loss produced a non-finite value".into()))
    }
}

/// Mean cross-entropy of the batch under `params`.
pub fn forward_loss(params: &ParamVector, batch: &[Sample]) -> Result<f64> {
    let refs: Vec<&Sample> = batch.iter().collect();
    forward_loss_refs(params, &refs)
}

fn gradient_refs(params: &ParamVector, batch: &[&Sample]) -> Result<GradVector> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let dims = dims_of(&params.layout)?;
    check_batch(&dims, batch)?;
    let d = dims.input_dim;
    let c = dims.num_classes;
    let v = &params.values;
    let mut g = vec![0.0; v.len()];
    let inv_b = 1.0 / batch.len() as f64;

    let mut logits = vec![0.0; c];
    match dims.hidden {
        None => {
            for s in batch {
                logits_into(params, &dims, &s.features, &mut logits);
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let denom: f64 = logits.iter().map(|z| (z - max).exp()).sum();
                for k in 0..c {
                    let p = (logits[k] - max).exp() / denom;
                    let delta = (p - if k == s.label { 1.0 } else { 0.0 }) * inv_b;
                    for (gw, x) in g[k * d..(k + 1) * d].iter_mut().zip(&s.features) {
                        *gw += delta * x;
                    }
                    g[c * d + k] += delta;
                }
            }
        }
        Some(h) => {
            let w1 = &v[0..h * d];
            let b1 = &v[h * d..h * d + h];
            let w2_off = h * d + h;
            let b2_off = w2_off + c * h;
            let mut act = vec![0.0; h];
            for s in batch {
                for (j, a) in act.iter_mut().enumerate() {
                    let mut z = b1[j];
                    for (w, x) in w1[j * d..(j + 1) * d].iter().zip(&s.features) {
                        z += w * x;
                    }
                    *a = z.tanh();
                }
                for k in 0..c {
                    let mut z = v[b2_off + k];
                    for (w, a) in v[w2_off + k * h..w2_off + (k + 1) * h].iter().zip(&act) {
                        z += w * a;
                    }
                    logits[k] = z;
                }
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let denom: f64 = logits.iter().map(|z| (z - max).exp()).sum();
                let mut d_act = vec![0.0; h];
                for k in 0..c {
                    let p = (logits[k] - max).exp() / denom;
                    let delta = (p - if k == s.label { 1.0 } else { 0.0 }) * inv_b;
                    for (j, a) in act.iter().enumerate() {
                        g[w2_off + k * h + j] += delta * a;
                        d_act[j] += delta * v[w2_off + k * h + j];
                    }
                    g[b2_off + k] += delta;
                }
                for j in 0..h {
                    let da = d_act[j] * (1.0 - act[j] * act[j]);
                    for (gw, x) in g[j * d..(j + 1) * d].iter_mut().zip(&s.features) {
                        *gw += da * x;
                    }
                    g[h * d + j] += da;
                }
            }
        }
    }

    Ok(GradVector { values: g, layout: params.layout.clone() })
}

/// Analytic gradient of [`forward_loss`] with respect to `params`.
pub fn gradient(params: &ParamVector, batch: &[Sample]) -> Result<GradVector> {
    let refs: Vec<&Sample> = batch.iter().collect();
    gradient_refs(params, &refs)
}

/// Runs `local_epochs` passes of minibatch SGD over the shard.
///
/// Each pass shuffles the shard with a ChaCha8 stream seeded by `seed`,
/// partitions it into batches of `batch_size` (the final short batch is
/// kept), and applies `w <- w - lr * grad` per batch. Batch membership
/// comes from the shuffle; accumulation runs in sample-index order.
pub fn sgd_local_train(
    params: &ParamVector,
    shard: &[Sample],
    hyper: &Hyperparams,
    seed: u64,
) -> Result<ParamVector> {
    if shard.is_empty() {
        return Err(Error::InvalidInput("empty shard".into()));
    }
    let mut w = params.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..shard.len()).collect();
    for _ in 0..hyper.local_epochs {
        shuffle(&mut order, &mut rng);
        for chunk in order.chunks(hyper.batch_size) {
            let mut members = chunk.to_vec();
            members.sort_unstable();
            let batch: Vec<&Sample> = members.iter().map(|&i| &shard[i]).collect();
            let g = gradient_refs(&w, &batch)?;
            for (wv, gv) in w.values.iter_mut().zip(&g.values) {
                *wv -= hyper.lr * gv;
            }
        }
    }
    w.check_finite("sgd_local_train")
}

/// Fisher-Yates shuffle driven by the given generator.
pub(crate) fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// Simulated payload size in bytes: scalar count times `dtype_bytes`,
/// unless a fixed override pins the size (Z independent of the toy model).
pub fn param_size_bytes(params: &ParamVector, override_bytes: Option<u64>) -> u64 {
    override_bytes.unwrap_or(params.scalar_count() as u64 * params.dtype_bytes as u64)
}

/// Convex combination of models with weights normalized to sum 1;
/// summation runs in input order.
pub fn weighted_average(models: &[ParamVector], weights: &[f64]) -> Result<ParamVector> {
    if models.is_empty() || models.len() != weights.len() {
        return Err(Error::InvalidInput(format!(
            "need one weight per model, got {} models and {} weights",
            models.len(),
            weights.len()
        )));
    }
    let first = &models[0];
    for m in &models[1..] {
        if m.layout != first.layout {
            return Err(Error::InvalidInput("model layouts differ".into()));
        }
    }
    if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(Error::InvalidInput("weights must be non-negative and finite".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput("at least one weight must be positive".into()));
    }
    let mut values = vec![0.0; first.values.len()];
    for (m, &w) in models.iter().zip(weights) {
        let frac = w / total;
        for (acc, v) in values.iter_mut().zip(&m.values) {
            *acc += frac * v;
        }
    }
    ParamVector { values, layout: first.layout.clone(), dtype_bytes: first.dtype_bytes }
        .check_finite("weighted_average")
}

/// Argmax class prediction; ties resolve to the smallest class index.
pub fn predict(params: &ParamVector, features: &[f64]) -> Result<usize> {
    let dims = dims_of(&params.layout)?;
    if features.len() != dims.input_dim {
        return Err(Error::InvalidInput(format!(
            "feature dimension {} does not match model input_dim {}",
            features.len(),
            dims.input_dim
        )));
    }
    let mut logits = vec![0.0; dims.num_classes];
    logits_into(params, &dims, features, &mut logits);
    let mut best = 0;
    for (k, z) in logits.iter().enumerate() {
        if *z > logits[best] {
            best = k;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use rand::Rng;

    fn random_batch(rng: &mut ChaCha8Rng, n: usize, dim: usize, classes: usize) -> Vec<Sample> {
        (0..n)
            .map(|_| Sample {
                features: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
                label: rng.random_range(0..classes),
            })
            .collect()
    }

    fn randomize(params: &mut ParamVector, rng: &mut ChaCha8Rng) {
        for v in &mut params.values {
            *v = rng.random_range(-0.5..0.5);
        }
    }

    /// Central finite differences, step 1e-5; independent of `gradient`.
    fn fd_gradient(params: &ParamVector, batch: &[Sample]) -> Vec<f64> {
        let h = 1e-5;
        let mut out = Vec::with_capacity(params.values.len());
        let mut probe = params.clone();
        for i in 0..params.values.len() {
            let orig = probe.values[i];
            probe.values[i] = orig + h;
            let up = forward_loss(&probe, batch).unwrap();
            probe.values[i] = orig - h;
            let down = forward_loss(&probe, batch).unwrap();
            probe.values[i] = orig;
            out.push((up - down) / (2.0 * h));
        }
        out
    }

    #[test]
    fn init_shapes_linear() {
        let m = init_model(7, 4, 3, None).unwrap();
        assert_eq!(m.layout.len(), 2);
        assert_eq!((m.layout[0].rows, m.layout[0].cols), (3, 4));
        assert_eq!((m.layout[1].rows, m.layout[1].cols), (3, 1));
        assert_eq!(m.scalar_count(), 15);
        assert_eq!(m.values.len(), 15);
    }

    #[test]
    fn init_shapes_hidden() {
        let m = init_model(7, 784, 10, Some(32)).unwrap();
        assert_eq!(m.scalar_count(), 784 * 32 + 32 + 32 * 10 + 10);
        assert_eq!(m.scalar_count(), 25450);
    }

    #[test]
    fn init_deterministic() {
        let a = init_model(7, 6, 4, Some(5)).unwrap();
        let b = init_model(7, 6, 4, Some(5)).unwrap();
        assert_eq!(a.values, b.values);
        let c = init_model(8, 6, 4, Some(5)).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn init_rejects_zero_hidden() {
        assert!(init_model(1, 4, 3, Some(0)).is_err());
        assert!(init_model(1, 0, 3, None).is_err());
        assert!(init_model(1, 4, 1, None).is_err());
    }

    #[test]
    fn zero_params_loss_is_ln_c() {
        for classes in [2usize, 3, 10] {
            let mut m = init_model(1, 5, classes, None).unwrap();
            m.values.iter_mut().for_each(|v| *v = 0.0);
            let mut rng = seeded_rng(3, &[classes as u64]);
            let batch = random_batch(&mut rng, 17, 5, classes);
            let loss = forward_loss(&m, &batch).unwrap();
            assert!((loss - (classes as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_shrinks_as_correct_logit_grows() {
        // One sample; push the correct class's bias upward.
        let batch = vec![Sample { features: vec![0.0, 0.0], label: 1 }];
        let mut prev = f64::INFINITY;
        for scale in [0.0, 1.0, 4.0, 16.0] {
            let mut m = init_model(1, 2, 3, None).unwrap();
            m.values.iter_mut().for_each(|v| *v = 0.0);
            m.values[2 * 3 + 1] = scale; // bias of class 1
            let loss = forward_loss(&m, &batch).unwrap();
            assert!(loss < prev);
            prev = loss;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn loss_matches_naive_reimplementation() {
        // Scalar-by-scalar softmax cross-entropy without logsumexp tricks.
        let mut rng = seeded_rng(11, &[]);
        for _ in 0..20 {
            let mut m = init_model(2, 4, 3, None).unwrap();
            randomize(&mut m, &mut rng);
            let batch = random_batch(&mut rng, 9, 4, 3);
            let mut naive = 0.0;
            for s in &batch {
                let mut logits = [0.0f64; 3];
                for (k, l) in logits.iter_mut().enumerate() {
                    for d in 0..4 {
                        *l += m.values[k * 4 + d] * s.features[d];
                    }
                    *l += m.values[12 + k];
                }
                let denom: f64 = logits.iter().map(|z| z.exp()).sum();
                naive += -(logits[s.label].exp() / denom).ln();
            }
            naive /= batch.len() as f64;
            let loss = forward_loss(&m, &batch).unwrap();
            assert!((loss - naive).abs() <= 1e-10 * naive.abs().max(1.0));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = seeded_rng(5, &[]);
        let mut worst: f64 = 0.0;
        for case in 0..50 {
            let hidden = if case % 2 == 0 { None } else { Some(4) };
            let mut m = init_model(case as u64, 5, 3, hidden).unwrap();
            randomize(&mut m, &mut rng);
            let batch = random_batch(&mut rng, 6, 5, 3);
            let g = gradient(&m, &batch).unwrap();
            let fd = fd_gradient(&m, &batch);
            for (a, b) in g.values.iter().zip(&fd) {
                let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        assert!(worst < 1e-4, "max relative gradient error {worst}");
    }

    #[test]
    fn gradient_mean_invariant_under_duplication() {
        let mut rng = seeded_rng(9, &[]);
        let mut m = init_model(3, 4, 3, None).unwrap();
        randomize(&mut m, &mut rng);
        let batch = random_batch(&mut rng, 5, 4, 3);
        let doubled: Vec<Sample> = batch.iter().chain(batch.iter()).cloned().collect();
        let g1 = gradient(&m, &batch).unwrap();
        let g2 = gradient(&m, &doubled).unwrap();
        for (a, b) in g1.values.iter().zip(&g2.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weight_bias_gradient_is_uniform_minus_frequency() {
        let classes = 4;
        let mut m = init_model(1, 3, classes, None).unwrap();
        m.values.iter_mut().for_each(|v| *v = 0.0);
        // 8 samples: labels 0,0,0,0,1,1,2,3 -> freqs 1/2, 1/4, 1/8, 1/8
        let labels = [0, 0, 0, 0, 1, 1, 2, 3];
        let batch: Vec<Sample> = labels
            .iter()
            .map(|&label| Sample { features: vec![1.0, 1.0, 1.0], label })
            .collect();
        let g = gradient(&m, &batch).unwrap();
        let bias_off = classes * 3;
        for (k, freq) in [0.5, 0.25, 0.125, 0.125].iter().enumerate() {
            let expect = 1.0 / classes as f64 - freq;
            assert!((g.values[bias_off + k] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn sgd_zero_lr_is_identity() {
        let mut rng = seeded_rng(21, &[]);
        let mut m = init_model(2, 4, 3, None).unwrap();
        randomize(&mut m, &mut rng);
        let shard = random_batch(&mut rng, 23, 4, 3);
        let hyper = Hyperparams { lr: 0.0, batch_size: 10, local_epochs: 3 };
        let out = sgd_local_train(&m, &shard, &hyper, 99).unwrap();
        assert_eq!(out.values, m.values);
    }

    #[test]
    fn sgd_single_full_batch_equals_one_step() {
        let mut rng = seeded_rng(22, &[]);
        let mut m = init_model(2, 4, 3, None).unwrap();
        randomize(&mut m, &mut rng);
        let shard = random_batch(&mut rng, 8, 4, 3);
        let hyper = Hyperparams::new(0.05, 8, 1).unwrap();
        let out = sgd_local_train(&m, &shard, &hyper, 1).unwrap();
        let g = gradient(&m, &shard).unwrap();
        for ((o, w), gv) in out.values.iter().zip(&m.values).zip(&g.values) {
            assert_eq!(*o, w - 0.05 * gv);
        }
    }

    #[test]
    fn sgd_descends_on_separable_shard() {
        // Two linearly separable blobs.
        let mut rng = seeded_rng(33, &[]);
        let shard: Vec<Sample> = (0..40)
            .map(|i| {
                let label = i % 2;
                let center = if label == 0 { -2.0 } else { 2.0 };
                Sample {
                    features: vec![
                        center + rng.random_range(-0.5..0.5),
                        center + rng.random_range(-0.5..0.5),
                    ],
                    label,
                }
            })
            .collect();
        let m = init_model(4, 2, 2, None).unwrap();
        let hyper = Hyperparams::new(0.01, 10, 5).unwrap();
        let before = forward_loss(&m, &shard).unwrap();
        let out = sgd_local_train(&m, &shard, &hyper, 7).unwrap();
        let after = forward_loss(&out, &shard).unwrap();
        assert!(after < before, "loss did not descend: {before} -> {after}");
    }

    #[test]
    fn sgd_deterministic() {
        let mut rng = seeded_rng(44, &[]);
        let m = init_model(5, 3, 3, None).unwrap();
        let shard = random_batch(&mut rng, 15, 3, 3);
        let hyper = Hyperparams::new(0.01, 4, 2).unwrap();
        let a = sgd_local_train(&m, &shard, &hyper, 5).unwrap();
        let b = sgd_local_train(&m, &shard, &hyper, 5).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn sgd_rejects_empty_shard() {
        let m = init_model(5, 3, 3, None).unwrap();
        let hyper = Hyperparams::new(0.01, 4, 1).unwrap();
        assert!(sgd_local_train(&m, &[], &hyper, 0).is_err());
    }

    #[test]
    fn param_size_arithmetic() {
        let m = init_model(7, 4, 3, None).unwrap();
        assert_eq!(param_size_bytes(&m, None), 60);
        assert_eq!(param_size_bytes(&m, Some(mb_to_bytes(0.606))), 635_437);
        let big = init_model(7, 784, 10, Some(32)).unwrap();
        assert_eq!(param_size_bytes(&big, None), 101_800);
    }

    #[test]
    fn weighted_average_fixed_point_and_degenerate() {
        let m = init_model(9, 4, 3, None).unwrap();
        let avg = weighted_average(&[m.clone(), m.clone(), m.clone()], &[0.2, 5.0, 1.3]).unwrap();
        for (a, b) in avg.values.iter().zip(&m.values) {
            assert!((a - b).abs() <= 1e-12);
        }
        let mut other = m.clone();
        other.values.iter_mut().for_each(|v| *v += 1.0);
        let first = weighted_average(&[m.clone(), other], &[1.0, 0.0]).unwrap();
        assert_eq!(first.values, m.values);
    }

    #[test]
    fn weighted_average_matches_per_coordinate_oracle() {
        let mut rng = seeded_rng(55, &[]);
        let mut ms = Vec::new();
        for s in 0..3 {
            let mut m = init_model(s, 4, 3, None).unwrap();
            randomize(&mut m, &mut rng);
            ms.push(m);
        }
        let avg = weighted_average(&ms, &[1.0, 2.0, 3.0]).unwrap();
        for i in 0..avg.values.len() {
            let expect =
                (ms[0].values[i] + 2.0 * ms[1].values[i] + 3.0 * ms[2].values[i]) / 6.0;
            assert!((avg.values[i] - expect).abs() <= 1e-12);
        }
    }

    #[test]
    fn weighted_average_rejects_bad_inputs() {
        let a = init_model(1, 4, 3, None).unwrap();
        let b = init_model(1, 4, 4, None).unwrap();
        assert!(weighted_average(&[a.clone(), b], &[1.0, 1.0]).is_err());
        assert!(weighted_average(&[a.clone()], &[0.0]).is_err());
        assert!(weighted_average(&[a], &[-1.0]).is_err());
    }

    #[test]
    fn averages_stay_within_coordinate_envelope() {
        let mut rng = seeded_rng(66, &[]);
        for _ in 0..50 {
            let mut ms = Vec::new();
            for s in 0..4 {
                let mut m = init_model(s, 3, 2, None).unwrap();
                randomize(&mut m, &mut rng);
                ms.push(m);
            }
            let ws: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..2.0)).collect();
            if ws.iter().sum::<f64>() <= 0.0 {
                continue;
            }
            let avg = weighted_average(&ms, &ws).unwrap();
            for i in 0..avg.values.len() {
                let lo = ms.iter().map(|m| m.values[i]).fold(f64::INFINITY, f64::min);
                let hi = ms.iter().map(|m| m.values[i]).fold(f64::NEG_INFINITY, f64::max);
                assert!(avg.values[i] >= lo - 1e-12 && avg.values[i] <= hi + 1e-12);
            }
        }
    }
}
