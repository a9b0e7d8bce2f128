//! Flat key=value configuration: parsing, presets, canonical rendering.
//!
//! The format is one `key = value` pair per line with `#` comments.
//! Every simulation parameter has a documented key; unknown keys are
//! rejected by name. Optional fields take the literal `none`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::channel::FadingModel;
use crate::engine::{
    ChannelParams, DatasetSpec, ExperimentConfig, MatrixUnit, P2pParams, PartitionScheme,
    RbObjective,
};
use crate::error::{Error, Result};

/// All recognized keys, in canonical render order.
pub const KNOWN_KEYS: &[&str] = &[
    "architecture",
    "strategy",
    "num_clients",
    "cfraction",
    "local_epoch",
    "global_epoch",
    "batch_size",
    "lr",
    "tier_count",
    "subset_count",
    "alpha",
    "capacity_tiers",
    "hidden",
    "rb_objective",
    "metrics_only",
    "seed",
    "bandwidth_hz",
    "tx_power_w",
    "noise_psd_dbm_hz",
    "interference_low_w",
    "interference_high_w",
    "distance_max_m",
    "payload_mb",
    "rayleigh_o",
    "fading",
    "mc_samples",
    "rb_count",
    "data_n",
    "data_dim",
    "data_classes",
    "data_separation",
    "partition",
    "labels_per_client",
    "shard_multipliers",
    "idx_images",
    "idx_labels",
    "matrix_file",
    "matrix_unit",
    "cost_low",
    "cost_high",
    "unreachable_prob",
];

/// Parses `key = value` lines; `#` starts a comment; duplicate keys in
/// one source are rejected.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Parse(format!("line {}: expected key=value, got {raw:?}", lineno + 1))
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !seen.insert(key.clone()) {
            return Err(Error::Parse(format!("line {}: duplicate key {key}", lineno + 1)));
        }
        pairs.push((key, value));
    }
    Ok(pairs)
}

/// Expands a preset name into its parameter overrides.
pub fn preset_pairs(name: &str) -> Result<Vec<(String, String)>> {
    let (clients, cfraction, local_epoch, rounds) = match name {
        "Pr1" => (100, 0.1, 1, 300),
        "Pr2" => (100, 0.1, 5, 300),
        "Pr3" => (100, 0.2, 1, 300),
        "Pr4" => (100, 0.2, 5, 300),
        "Pr5" => (60, 0.1, 1, 250),
        "Pr6" => (60, 0.1, 5, 250),
        other => return Err(Error::Config(format!("unknown preset {other:?}"))),
    };
    Ok(vec![
        ("num_clients".into(), clients.to_string()),
        ("cfraction".into(), cfraction.to_string()),
        ("local_epoch".into(), local_epoch.to_string()),
        ("global_epoch".into(), rounds.to_string()),
    ])
}

fn float17(v: f64) -> String {
    format!("{v:.16e}")
}

fn fading_str(f: FadingModel) -> (&'static str, usize) {
    match f {
        FadingModel::Deterministic => ("deterministic", 1000),
        FadingModel::Rayleigh { mc_samples } => ("rayleigh", mc_samples),
    }
}

fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or("none".into(), |p| p.display().to_string())
}

/// Canonical rendering of a resolved configuration; feeding it back
/// through [`resolve`] reproduces the config. Floats carry 17 significant
/// digits so 64-bit values round-trip.
pub fn render_config(cfg: &ExperimentConfig) -> String {
    let (fading, mc_samples) = fading_str(cfg.channel.fading);
    let pairs: Vec<(&str, String)> = vec![
        ("architecture", cfg.architecture.as_str().into()),
        ("strategy", cfg.strategy.as_str().into()),
        ("num_clients", cfg.num_clients.to_string()),
        ("cfraction", float17(cfg.cfraction)),
        ("local_epoch", cfg.local_epoch.to_string()),
        ("global_epoch", cfg.global_epoch.to_string()),
        ("batch_size", cfg.batch_size.to_string()),
        ("lr", float17(cfg.lr)),
        ("tier_count", cfg.tier_count.to_string()),
        ("subset_count", cfg.subset_count.to_string()),
        ("alpha", float17(cfg.alpha)),
        (
            "capacity_tiers",
            cfg.capacity_tiers.iter().map(|c| float17(*c)).collect::<Vec<_>>().join(","),
        ),
        ("hidden", cfg.hidden.map_or("none".into(), |h| h.to_string())),
        (
            "rb_objective",
            match cfg.rb_objective {
                RbObjective::Energy => "energy".into(),
                RbObjective::Delay => "delay".into(),
            },
        ),
        ("metrics_only", cfg.metrics_only.to_string()),
        ("seed", cfg.seed.to_string()),
        ("bandwidth_hz", float17(cfg.channel.bandwidth_hz)),
        ("tx_power_w", float17(cfg.channel.tx_power_w)),
        ("noise_psd_dbm_hz", float17(cfg.channel.noise_psd_dbm_hz)),
        ("interference_low_w", float17(cfg.channel.interference_low_w)),
        ("interference_high_w", float17(cfg.channel.interference_high_w)),
        ("distance_max_m", float17(cfg.channel.distance_max_m)),
        ("payload_mb", cfg.channel.payload_mb.map_or("none".into(), float17)),
        ("rayleigh_o", float17(cfg.channel.rayleigh_o)),
        ("fading", fading.into()),
        ("mc_samples", mc_samples.to_string()),
        ("rb_count", cfg.channel.rb_count.map_or("none".into(), |n| n.to_string())),
        ("data_n", cfg.dataset.n.to_string()),
        ("data_dim", cfg.dataset.dim.to_string()),
        ("data_classes", cfg.dataset.classes.to_string()),
        ("data_separation", float17(cfg.dataset.separation)),
        (
            "partition",
            match cfg.dataset.partition {
                PartitionScheme::Iid => "iid".into(),
                PartitionScheme::LabelSkew => "label_skew".into(),
            },
        ),
        ("labels_per_client", cfg.dataset.labels_per_client.to_string()),
        (
            "shard_multipliers",
            cfg.dataset.shard_multipliers.as_ref().map_or("none".into(), |m| {
                m.iter().map(|v| float17(*v)).collect::<Vec<_>>().join(",")
            }),
        ),
        ("idx_images", opt_path(&cfg.dataset.idx_images)),
        ("idx_labels", opt_path(&cfg.dataset.idx_labels)),
        ("matrix_file", opt_path(&cfg.p2p.matrix_file)),
        (
            "matrix_unit",
            match cfg.p2p.matrix_unit {
                MatrixUnit::Delay => "delay".into(),
                MatrixUnit::Energy => "energy".into(),
            },
        ),
        ("cost_low", float17(cfg.p2p.cost_low)),
        ("cost_high", float17(cfg.p2p.cost_high)),
        ("unreachable_prob", float17(cfg.p2p.unreachable_prob)),
    ];
    debug_assert_eq!(pairs.len(), KNOWN_KEYS.len());
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(k);
        out.push('=');
        out.push_str(&v);
        out.push('\n');
    }
    out
}

struct Lookup(BTreeMap<String, String>);

impl Lookup {
    fn opt(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|s| s.as_str()).filter(|s| *s != "none")
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.opt(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| Error::Config(format!("key {key}: cannot parse {raw:?}"))),
        }
    }

    fn parsed_opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.opt(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("key {key}: cannot parse {raw:?}"))),
        }
    }

    fn float_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.opt(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|_| {
                        Error::Config(format!("key {key}: cannot parse {tok:?} as a number"))
                    })
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some),
        }
    }
}

/// Merges override layers (later wins) over the defaults and builds the
/// experiment config. Unknown keys are rejected by name; `strategy` is
/// required.
pub fn resolve(layers: &[Vec<(String, String)>]) -> Result<ExperimentConfig> {
    let mut map = BTreeMap::new();
    for layer in layers {
        for (k, v) in layer {
            map.insert(k.clone(), v.clone());
        }
    }

    let unknown: Vec<&String> =
        map.keys().filter(|k| !KNOWN_KEYS.contains(&k.as_str())).collect();
    if !unknown.is_empty() {
        let list = unknown.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ");
        return Err(Error::Config(format!("unknown config keys: {list}")));
    }
    if !map.contains_key("strategy") {
        return Err(Error::Config("missing required key: strategy".into()));
    }

    let look = Lookup(map);
    let defaults = ExperimentConfig::default();

    let fading = match look.opt("fading") {
        None | Some("deterministic") => FadingModel::Deterministic,
        Some("rayleigh") => FadingModel::Rayleigh {
            mc_samples: look.parsed("mc_samples", 1000usize)?,
        },
        Some(other) => return Err(Error::Config(format!("unknown fading {other:?}"))),
    };

    let cfg = ExperimentConfig {
        architecture: look.parsed("architecture", defaults.architecture)?,
        strategy: look.parsed("strategy", defaults.strategy)?,
        num_clients: look.parsed("num_clients", defaults.num_clients)?,
        cfraction: look.parsed("cfraction", defaults.cfraction)?,
        local_epoch: look.parsed("local_epoch", defaults.local_epoch)?,
        global_epoch: look.parsed("global_epoch", defaults.global_epoch)?,
        batch_size: look.parsed("batch_size", defaults.batch_size)?,
        lr: look.parsed("lr", defaults.lr)?,
        tier_count: look.parsed("tier_count", defaults.tier_count)?,
        subset_count: look.parsed("subset_count", defaults.subset_count)?,
        alpha: look.parsed("alpha", defaults.alpha)?,
        capacity_tiers: look
            .float_list("capacity_tiers")?
            .unwrap_or(defaults.capacity_tiers),
        hidden: look.parsed_opt("hidden")?,
        rb_objective: look.parsed("rb_objective", defaults.rb_objective)?,
        metrics_only: look.parsed("metrics_only", defaults.metrics_only)?,
        seed: look.parsed("seed", defaults.seed)?,
        channel: ChannelParams {
            bandwidth_hz: look.parsed("bandwidth_hz", defaults.channel.bandwidth_hz)?,
            tx_power_w: look.parsed("tx_power_w", defaults.channel.tx_power_w)?,
            noise_psd_dbm_hz: look
                .parsed("noise_psd_dbm_hz", defaults.channel.noise_psd_dbm_hz)?,
            interference_low_w: look
                .parsed("interference_low_w", defaults.channel.interference_low_w)?,
            interference_high_w: look
                .parsed("interference_high_w", defaults.channel.interference_high_w)?,
            distance_max_m: look.parsed("distance_max_m", defaults.channel.distance_max_m)?,
            payload_mb: match look.0.contains_key("payload_mb") {
                true => look.parsed_opt("payload_mb")?,
                false => defaults.channel.payload_mb,
            },
            rayleigh_o: look.parsed("rayleigh_o", defaults.channel.rayleigh_o)?,
            fading,
            rb_count: look.parsed_opt("rb_count")?,
        },
        dataset: DatasetSpec {
            n: look.parsed("data_n", defaults.dataset.n)?,
            dim: look.parsed("data_dim", defaults.dataset.dim)?,
            classes: look.parsed("data_classes", defaults.dataset.classes)?,
            separation: look.parsed("data_separation", defaults.dataset.separation)?,
            partition: look.parsed("partition", defaults.dataset.partition)?,
            labels_per_client: look
                .parsed("labels_per_client", defaults.dataset.labels_per_client)?,
            shard_multipliers: look.float_list("shard_multipliers")?,
            idx_images: look.parsed_opt("idx_images")?,
            idx_labels: look.parsed_opt("idx_labels")?,
        },
        p2p: P2pParams {
            matrix_file: look.parsed_opt("matrix_file")?,
            matrix_unit: look.parsed("matrix_unit", defaults.p2p.matrix_unit)?,
            cost_low: look.parsed("cost_low", defaults.p2p.cost_low)?,
            cost_high: look.parsed("cost_high", defaults.p2p.cost_high)?,
            unreachable_prob: look.parsed("unreachable_prob", defaults.p2p.unreachable_prob)?,
        },
    };
    Ok(cfg)
}

/// FNV-1a hash of the canonical config text, for deterministic output names.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in render_config(cfg).bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")[..8].to_string()
}
