//! End-to-end experiment loops for both training architectures, the
//! uniform-sampling baseline, metrics accounting, and client-count sweeps.

use std::path::PathBuf;

use rand::Rng;

use crate::channel::{dbm_per_hz_to_w_per_hz, FadingModel, LinkState, RBlock};
use crate::data::{self, Sample, Shard};
use crate::error::{Error, Result};
use crate::model::{self, Hyperparams, ParamVector};
use crate::p2p::{
    aggregate_subsets, chain_train, greedy_backtrack_path, held_karp_path, partition_balanced,
    ConsumptionMatrix,
};
use crate::rng::{seeded_rng, stream, subseed};
use crate::scheduler::{
    bottleneck_assign, build_delay_cost_matrix, build_energy_cost_matrix, delay_spread,
    hungarian_assign, local_delay, power_tiered_sample, ComputeProfile, DelayModel,
};

/// Which training topology a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Traditional,
    P2p,
}

impl Architecture {
    pub fn as_str(&self) -> &'static str {
        match self {
            Architecture::Traditional => "traditional",
            Architecture::P2p => "p2p",
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "traditional" => Ok(Architecture::Traditional),
            "p2p" => Ok(Architecture::P2p),
            other => Err(Error::Config(format!("unknown architecture {other:?}"))),
        }
    }
}

/// Planning strategy within an architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    CncOptimized,
    FedavgBaseline,
    P2pRandomK,
    P2pFullChain,
    P2pTsp,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::CncOptimized => "cnc_optimized",
            Strategy::FedavgBaseline => "fedavg_baseline",
            Strategy::P2pRandomK => "p2p_random_k",
            Strategy::P2pFullChain => "p2p_full_chain",
            Strategy::P2pTsp => "p2p_tsp",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cnc_optimized" => Ok(Strategy::CncOptimized),
            "fedavg_baseline" => Ok(Strategy::FedavgBaseline),
            "p2p_random_k" => Ok(Strategy::P2pRandomK),
            "p2p_full_chain" => Ok(Strategy::P2pFullChain),
            "p2p_tsp" => Ok(Strategy::P2pTsp),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Resource-block assignment objective: total energy (solved by the
/// Hungarian method) or worst-case delay (bottleneck assignment).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbObjective {
    Energy,
    Delay,
}

impl std::str::FromStr for RbObjective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "energy" => Ok(RbObjective::Energy),
            "delay" => Ok(RbObjective::Delay),
            other => Err(Error::Config(format!("unknown rb_objective {other:?}"))),
        }
    }
}

/// Unit carried by the peer-to-peer consumption matrix; metrics route
/// hop costs to delay or energy tallies accordingly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixUnit {
    Delay,
    Energy,
}

impl std::str::FromStr for MatrixUnit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delay" => Ok(MatrixUnit::Delay),
            "energy" => Ok(MatrixUnit::Energy),
            other => Err(Error::Config(format!("unknown matrix_unit {other:?}"))),
        }
    }
}

/// How the training data is split across clients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionScheme {
    Iid,
    LabelSkew,
}

impl std::str::FromStr for PartitionScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid" => Ok(PartitionScheme::Iid),
            "label_skew" => Ok(PartitionScheme::LabelSkew),
            other => Err(Error::Config(format!("unknown partition {other:?}"))),
        }
    }
}

/// Wireless uplink parameters shared by all clients.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub bandwidth_hz: f64,
    pub tx_power_w: f64,
    pub noise_psd_dbm_hz: f64,
    pub interference_low_w: f64,
    pub interference_high_w: f64,
    pub distance_max_m: f64,
    /// Fixed payload override in MB; `None` sizes the payload from the model.
    pub payload_mb: Option<f64>,
    pub rayleigh_o: f64,
    pub fading: FadingModel,
    /// Resource blocks per round; defaults to the selection size.
    pub rb_count: Option<usize>,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            bandwidth_hz: 1e6,
            tx_power_w: 0.01,
            noise_psd_dbm_hz: -174.0,
            interference_low_w: 1e-8,
            interference_high_w: 1.1e-8,
            distance_max_m: 500.0,
            payload_mb: Some(0.606),
            rayleigh_o: 1.0,
            fading: FadingModel::Deterministic,
            rb_count: None,
        }
    }
}

/// Dataset source and partition plan.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub n: usize,
    pub dim: usize,
    pub classes: usize,
    pub separation: f64,
    pub partition: PartitionScheme,
    pub labels_per_client: usize,
    /// Per-client shard-size multipliers (IID only); `None` keeps shards equal.
    pub shard_multipliers: Option<Vec<f64>>,
    pub idx_images: Option<PathBuf>,
    pub idx_labels: Option<PathBuf>,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            n: 2500,
            dim: 10,
            classes: 10,
            separation: 6.0,
            partition: PartitionScheme::Iid,
            labels_per_client: 2,
            shard_multipliers: None,
            idx_images: None,
            idx_labels: None,
        }
    }
}

/// Peer-to-peer consumption matrix source.
#[derive(Debug, Clone, PartialEq)]
pub struct P2pParams {
    pub matrix_file: Option<PathBuf>,
    pub matrix_unit: MatrixUnit,
    pub cost_low: f64,
    pub cost_high: f64,
    pub unreachable_prob: f64,
}

impl Default for P2pParams {
    fn default() -> Self {
        Self {
            matrix_file: None,
            matrix_unit: MatrixUnit::Delay,
            cost_low: 1.0,
            cost_high: 10.0,
            unreachable_prob: 0.0,
        }
    }
}

/// Complete description of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub architecture: Architecture,
    pub strategy: Strategy,
    pub num_clients: usize,
    pub cfraction: f64,
    pub local_epoch: usize,
    pub global_epoch: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Tier count m for power-tiered sampling.
    pub tier_count: usize,
    /// Subset count E for peer-to-peer rounds.
    pub subset_count: usize,
    /// Conversion factor from work units to seconds of local training.
    pub alpha: f64,
    /// Capacity levels assigned to contiguous client blocks.
    pub capacity_tiers: Vec<f64>,
    pub hidden: Option<usize>,
    pub rb_objective: RbObjective,
    /// Skip training and evaluation; communication metrics only.
    pub metrics_only: bool,
    pub seed: u64,
    pub channel: ChannelParams,
    pub dataset: DatasetSpec,
    pub p2p: P2pParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Traditional,
            strategy: Strategy::CncOptimized,
            num_clients: 100,
            cfraction: 0.1,
            local_epoch: 1,
            global_epoch: 300,
            batch_size: 10,
            lr: 0.01,
            tier_count: 4,
            subset_count: 4,
            alpha: 4.0 / 600.0,
            capacity_tiers: vec![1.0, 2.0, 3.0, 4.0],
            hidden: None,
            rb_objective: RbObjective::Energy,
            metrics_only: false,
            seed: 1,
            channel: ChannelParams::default(),
            dataset: DatasetSpec::default(),
            p2p: P2pParams::default(),
        }
    }
}

impl ExperimentConfig {
    /// Clients selected per round under the traditional architecture, or
    /// per random-k chain: round(cfraction * num_clients).
    pub fn selected_per_round(&self) -> usize {
        (self.cfraction * self.num_clients as f64).round() as usize
    }

    /// Rejects contradictory configurations before round 1.
    pub fn validate(&self) -> Result<()> {
        if self.num_clients < 1 {
            return Err(Error::Config("num_clients must be >= 1".into()));
        }
        if !(self.cfraction > 0.0 && self.cfraction <= 1.0) {
            return Err(Error::Config(format!("cfraction {} outside (0, 1]", self.cfraction)));
        }
        if self.global_epoch < 1 {
            return Err(Error::Config("global_epoch must be >= 1".into()));
        }
        if self.local_epoch < 1 || self.batch_size < 1 {
            return Err(Error::Config("local_epoch and batch_size must be >= 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config("lr must be positive".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::Config("alpha must be positive".into()));
        }
        if self.capacity_tiers.is_empty() || self.capacity_tiers.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::Config("capacity_tiers must be positive".into()));
        }
        let n_sel = self.selected_per_round();
        if n_sel < 1 || n_sel > self.num_clients {
            return Err(Error::Config(format!(
                "cfraction {} of {} clients selects {n_sel}",
                self.cfraction, self.num_clients
            )));
        }

        let ch = &self.channel;
        if !(ch.bandwidth_hz > 0.0) || !(ch.tx_power_w > 0.0) || !(ch.distance_max_m > 0.0) {
            return Err(Error::Config("channel parameters must be positive".into()));
        }
        if !(ch.interference_low_w >= 0.0) || ch.interference_high_w < ch.interference_low_w {
            return Err(Error::Config("need 0 <= interference_low_w <= interference_high_w".into()));
        }
        if !(ch.rayleigh_o > 0.0) {
            return Err(Error::Config("rayleigh_o must be positive".into()));
        }
        if let Some(mb) = ch.payload_mb {
            if !(mb > 0.0) {
                return Err(Error::Config("payload_mb must be positive".into()));
            }
        }
        if let FadingModel::Rayleigh { mc_samples } = ch.fading {
            if mc_samples < 1 {
                return Err(Error::Config("mc_samples must be >= 1".into()));
            }
        }

        let ds = &self.dataset;
        if ds.idx_images.is_some() != ds.idx_labels.is_some() {
            return Err(Error::Config("idx_images and idx_labels must be set together".into()));
        }
        if ds.idx_images.is_none() {
            if ds.dim < 1 || ds.classes < 2 {
                return Err(Error::Config("dataset needs dim >= 1 and classes >= 2".into()));
            }
            if !(ds.separation >= 0.0) {
                return Err(Error::Config("separation must be non-negative".into()));
            }
        }
        if let Some(mult) = &ds.shard_multipliers {
            if mult.len() != self.num_clients {
                return Err(Error::Config(format!(
                    "shard_multipliers has {} entries for {} clients",
                    mult.len(),
                    self.num_clients
                )));
            }
            if ds.partition != PartitionScheme::Iid {
                return Err(Error::Config(
                    "shard_multipliers requires the iid partition".into(),
                ));
            }
        }

        match self.architecture {
            Architecture::Traditional => {
                if !matches!(self.strategy, Strategy::CncOptimized | Strategy::FedavgBaseline) {
                    return Err(Error::Config(format!(
                        "strategy {} is not a traditional-architecture strategy",
                        self.strategy.as_str()
                    )));
                }
                if self.tier_count < 1 {
                    return Err(Error::Config("tier_count must be >= 1".into()));
                }
                if self.strategy == Strategy::CncOptimized {
                    let largest_tier = self.num_clients.div_ceil(self.tier_count);
                    if n_sel > largest_tier {
                        return Err(Error::Config(format!(
                            "selection of {n_sel} cannot fit the largest tier ({largest_tier})"
                        )));
                    }
                }
                if let Some(rb) = ch.rb_count {
                    if rb < n_sel {
                        return Err(Error::Config(format!(
                            "{rb} resource blocks cannot serve {n_sel} clients"
                        )));
                    }
                }
            }
            Architecture::P2p => {
                if matches!(self.strategy, Strategy::FedavgBaseline) {
                    return Err(Error::Config(
                        "fedavg_baseline is not a p2p strategy".into(),
                    ));
                }
                if self.strategy == Strategy::CncOptimized
                    && (self.subset_count < 1 || self.subset_count > self.num_clients)
                {
                    return Err(Error::Config(format!(
                        "subset_count {} outside [1, {}]",
                        self.subset_count, self.num_clients
                    )));
                }
                if self.strategy == Strategy::P2pTsp && self.num_clients > 15 {
                    return Err(Error::Config(
                        "p2p_tsp is limited to 15 clients by the exact solver".into(),
                    ));
                }
                let p = &self.p2p;
                if !(p.cost_low >= 0.0) || p.cost_high < p.cost_low {
                    return Err(Error::Config("need 0 <= cost_low <= cost_high".into()));
                }
                if !(0.0..=1.0).contains(&p.unreachable_prob) {
                    return Err(Error::Config("unreachable_prob outside [0, 1]".into()));
                }
            }
        }
        Ok(())
    }
}

/// Per-round metrics. Cumulative fields are prefix sums of the per-round
/// consumption fields.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub round: u32,
    pub test_accuracy: f64,
    pub sum_tx_energy_j: f64,
    pub max_tx_delay_s: f64,
    pub max_local_delay_s: f64,
    pub delay_spread_s: f64,
    pub round_wallclock_s: f64,
    pub cum_sum_tx_energy_j: f64,
    pub cum_max_tx_delay_s: f64,
    pub cum_max_local_delay_s: f64,
}

/// Argmax-prediction accuracy on a held-out set.
pub fn evaluate(params: &ParamVector, test: &[Sample]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::InvalidInput("empty test set".into()));
    }
    let mut hits = 0usize;
    for s in test {
        if model::predict(params, &s.features)? == s.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / test.len() as f64)
}

/// Dataset, shards, profiles, and the initial model for a run.
pub struct Prepared {
    pub train_shards: Vec<Shard>,
    pub test_set: Vec<Sample>,
    pub profiles: Vec<ComputeProfile>,
    pub model: ParamVector,
    pub hyper: Hyperparams,
    pub delay_model: DelayModel,
    pub payload_bytes: u64,
}

const TEST_FRACTION: f64 = 0.2;

/// Loads or generates the dataset, holds out the test split, partitions
/// shards, and derives client profiles.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let ds = &cfg.dataset;
    let full: Vec<Sample> = match (&ds.idx_images, &ds.idx_labels) {
        (Some(images), Some(labels)) => data::load_idx(images, labels)?,
        _ => data::gen_synthetic(
            subseed(cfg.seed, &[stream::DATA_GEN]),
            ds.n,
            ds.dim,
            ds.classes,
            ds.separation,
        )?,
    };
    if full.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    let dim = full[0].features.len();
    let classes = full.iter().map(|s| s.label).max().unwrap() + 1;
    if classes < 2 {
        return Err(Error::Config("dataset holds fewer than 2 classes".into()));
    }

    let mut order: Vec<usize> = (0..full.len()).collect();
    let mut rng = seeded_rng(cfg.seed, &[stream::HOLDOUT]);
    model::shuffle(&mut order, &mut rng);
    let n_test = ((full.len() as f64) * TEST_FRACTION).round() as usize;
    let n_test = n_test.clamp(1, full.len() - 1);
    let test_set: Vec<Sample> = order[..n_test].iter().map(|&i| full[i].clone()).collect();
    let train: Vec<Sample> = order[n_test..].iter().map(|&i| full[i].clone()).collect();
    if train.len() < cfg.num_clients {
        return Err(Error::Config(format!(
            "{} training samples cannot cover {} clients",
            train.len(),
            cfg.num_clients
        )));
    }

    let part_seed = subseed(cfg.seed, &[stream::PARTITION]);
    let train_shards = match (&ds.shard_multipliers, ds.partition) {
        (Some(mult), _) => data::partition_weighted(&train, mult, part_seed)?,
        (None, PartitionScheme::Iid) => data::partition_iid(&train, cfg.num_clients, part_seed)?,
        (None, PartitionScheme::LabelSkew) => data::partition_label_skew(
            &train,
            cfg.num_clients,
            ds.labels_per_client,
            part_seed,
        )?,
    };

    let tiers = &cfg.capacity_tiers;
    let profiles: Vec<ComputeProfile> = train_shards
        .iter()
        .enumerate()
        .map(|(i, shard)| ComputeProfile {
            client_id: i,
            capacity: tiers[i * tiers.len() / cfg.num_clients],
            shard_size: shard.len(),
        })
        .collect();

    let init = model::init_model(subseed(cfg.seed, &[stream::MODEL_INIT]), dim, classes, cfg.hidden)?;
    let payload_bytes = cfg
        .channel
        .payload_mb
        .map(model::mb_to_bytes)
        .unwrap_or_else(|| model::param_size_bytes(&init, None));

    Ok(Prepared {
        train_shards,
        test_set,
        profiles,
        model: init,
        hyper: Hyperparams::new(cfg.lr, cfg.batch_size, cfg.local_epoch)?,
        delay_model: DelayModel { alpha: cfg.alpha, local_epochs: cfg.local_epoch },
        payload_bytes,
    })
}

fn draw_distance(seed: u64, round: u64, client: u64, max_m: f64) -> f64 {
    let mut rng = seeded_rng(seed, &[stream::DISTANCE, round, client]);
    loop {
        let d = rng.random::<f64>() * max_m;
        if d > 0.0 {
            return d;
        }
    }
}

fn draw_interference(seed: u64, round: u64, rb: u64, low: f64, high: f64) -> f64 {
    let mut rng = seeded_rng(seed, &[stream::INTERFERENCE, round, rb]);
    low + (high - low) * rng.random::<f64>()
}

/// Uniform sample of `k` distinct client ids, in draw order.
fn uniform_sample(num_clients: usize, k: usize, seed: u64, tags: &[u64]) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..num_clients).collect();
    let mut rng = seeded_rng(seed, tags);
    model::shuffle(&mut ids, &mut rng);
    ids.truncate(k);
    ids
}

const MAX_SAMPLE_ATTEMPTS: u64 = 128;

/// Runs the traditional (server-aggregated) architecture.
pub fn run_traditional(cfg: &ExperimentConfig) -> Result<Vec<MetricsRecord>> {
    Ok(run_traditional_impl(cfg, None)?.0)
}

/// Traditional run that also returns the final global model.
pub fn run_traditional_detailed(
    cfg: &ExperimentConfig,
) -> Result<(Vec<MetricsRecord>, ParamVector)> {
    run_traditional_impl(cfg, None)
}

/// Traditional run with an externally forced per-round selection; used to
/// compare strategies on identical client sets.
pub fn run_traditional_forced(
    cfg: &ExperimentConfig,
    selections: &[Vec<usize>],
) -> Result<Vec<MetricsRecord>> {
    if selections.len() < cfg.global_epoch {
        return Err(Error::Config(format!(
            "{} forced selections for {} rounds",
            selections.len(),
            cfg.global_epoch
        )));
    }
    Ok(run_traditional_impl(cfg, Some(selections))?.0)
}

fn run_traditional_impl(
    cfg: &ExperimentConfig,
    forced: Option<&[Vec<usize>]>,
) -> Result<(Vec<MetricsRecord>, ParamVector)> {
    if cfg.architecture != Architecture::Traditional {
        return Err(Error::Config("run_traditional requires architecture=traditional".into()));
    }
    let prep = prepare(cfg)?;
    let n_sel = cfg.selected_per_round();
    let rb_count = cfg.channel.rb_count.unwrap_or(n_sel);
    let noise_w = dbm_per_hz_to_w_per_hz(cfg.channel.noise_psd_dbm_hz);

    let mut global = prep.model.clone();
    let mut records = Vec::with_capacity(cfg.global_epoch);
    let mut cum_energy = 0.0;
    let mut cum_tx_delay = 0.0;
    let mut cum_local_delay = 0.0;

    for round in 1..=cfg.global_epoch as u64 {
        let selected: Vec<usize> = match forced {
            Some(sels) => {
                let s = &sels[(round - 1) as usize];
                if s.is_empty() || s.iter().any(|&c| c >= cfg.num_clients) {
                    return Err(Error::Config(format!("bad forced selection in round {round}")));
                }
                s.clone()
            }
            None => match cfg.strategy {
                Strategy::CncOptimized => {
                    let mut plan = None;
                    for attempt in 0..MAX_SAMPLE_ATTEMPTS {
                        match power_tiered_sample(
                            &prep.profiles,
                            &prep.delay_model,
                            cfg.tier_count,
                            n_sel,
                            subseed(cfg.seed, &[stream::SELECTION, round, attempt]),
                        ) {
                            Ok(p) => {
                                plan = Some(p);
                                break;
                            }
                            Err(Error::TierTooSmall(_)) => continue,
                            Err(e) => return Err(e),
                        }
                    }
                    plan.ok_or_else(|| {
                        Error::Config(format!(
                            "round {round}: no tier could host {n_sel} clients after {MAX_SAMPLE_ATTEMPTS} draws"
                        ))
                    })?
                    .selected
                }
                Strategy::FedavgBaseline => {
                    uniform_sample(cfg.num_clients, n_sel, cfg.seed, &[stream::SELECTION, round])
                }
                other => {
                    return Err(Error::Config(format!(
                        "strategy {} is not a traditional-architecture strategy",
                        other.as_str()
                    )))
                }
            },
        };

        let links: Vec<LinkState> = selected
            .iter()
            .map(|&c| {
                LinkState::new(
                    draw_distance(cfg.seed, round, c as u64, cfg.channel.distance_max_m),
                    cfg.channel.rayleigh_o,
                    cfg.channel.tx_power_w,
                    noise_w,
                )
            })
            .collect::<Result<_>>()?;
        let rbs: Vec<RBlock> = (0..rb_count)
            .map(|k| {
                RBlock::new(
                    k,
                    cfg.channel.bandwidth_hz,
                    draw_interference(
                        cfg.seed,
                        round,
                        k as u64,
                        cfg.channel.interference_low_w,
                        cfg.channel.interference_high_w,
                    ),
                )
            })
            .collect::<Result<_>>()?;

        let fading_seed = subseed(cfg.seed, &[stream::FADING, round]);
        let energy_m = build_energy_cost_matrix(
            &links,
            &rbs,
            prep.payload_bytes,
            cfg.channel.fading,
            fading_seed,
        )?;
        let delay_m = build_delay_cost_matrix(
            &links,
            &rbs,
            prep.payload_bytes,
            cfg.channel.fading,
            fading_seed,
        )?;

        let assignment: Vec<usize> = match cfg.strategy {
            Strategy::CncOptimized => match cfg.rb_objective {
                RbObjective::Energy => hungarian_assign(&energy_m)?.0,
                RbObjective::Delay => bottleneck_assign(&delay_m)?.0,
            },
            _ => {
                let mut perm: Vec<usize> = (0..rb_count).collect();
                let mut rng = seeded_rng(cfg.seed, &[stream::RB_BASELINE, round]);
                model::shuffle(&mut perm, &mut rng);
                perm.truncate(selected.len());
                perm
            }
        };

        let sum_tx_energy_j: f64 =
            (0..selected.len()).map(|i| energy_m.at(i, assignment[i])).sum();
        let max_tx_delay_s = (0..selected.len())
            .map(|i| delay_m.at(i, assignment[i]))
            .fold(0.0, f64::max);

        let sel_profiles: Vec<ComputeProfile> =
            selected.iter().map(|&c| prep.profiles[c]).collect();
        let max_local_delay_s = sel_profiles
            .iter()
            .map(|p| local_delay(p, &prep.delay_model))
            .fold(0.0, f64::max);
        let delay_spread_s = delay_spread(&sel_profiles, &prep.delay_model)?;

        let test_accuracy = if cfg.metrics_only {
            0.0
        } else {
            let mut locals = Vec::with_capacity(selected.len());
            let mut weights = Vec::with_capacity(selected.len());
            for &c in &selected {
                let trained = model::sgd_local_train(
                    &global,
                    &prep.train_shards[c].samples,
                    &prep.hyper,
                    subseed(cfg.seed, &[stream::LOCAL_TRAIN, round, c as u64]),
                )?;
                locals.push(trained);
                weights.push(prep.train_shards[c].len() as f64);
            }
            global = model::weighted_average(&locals, &weights)?;
            evaluate(&global, &prep.test_set)?
        };

        cum_energy += sum_tx_energy_j;
        cum_tx_delay += max_tx_delay_s;
        cum_local_delay += max_local_delay_s;
        records.push(MetricsRecord {
            round: round as u32,
            test_accuracy,
            sum_tx_energy_j,
            max_tx_delay_s,
            max_local_delay_s,
            delay_spread_s,
            round_wallclock_s: max_local_delay_s + max_tx_delay_s,
            cum_sum_tx_energy_j: cum_energy,
            cum_max_tx_delay_s: cum_tx_delay,
            cum_max_local_delay_s: cum_local_delay,
        });
    }
    Ok((records, global))
}

/// Runs the peer-to-peer (chain) architecture.
pub fn run_p2p(cfg: &ExperimentConfig) -> Result<Vec<MetricsRecord>> {
    Ok(run_p2p_detailed(cfg)?.0)
}

/// Peer-to-peer run that also returns the final global model.
pub fn run_p2p_detailed(cfg: &ExperimentConfig) -> Result<(Vec<MetricsRecord>, ParamVector)> {
    if cfg.architecture != Architecture::P2p {
        return Err(Error::Config("run_p2p requires architecture=p2p".into()));
    }
    let prep = prepare(cfg)?;
    let matrix = match &cfg.p2p.matrix_file {
        Some(path) => ConsumptionMatrix::load(path)?,
        None => ConsumptionMatrix::random(
            cfg.num_clients,
            cfg.p2p.cost_low,
            cfg.p2p.cost_high,
            cfg.p2p.unreachable_prob,
            subseed(cfg.seed, &[stream::MATRIX]),
        )?,
    };
    if matrix.n() != cfg.num_clients {
        return Err(Error::Config(format!(
            "consumption matrix is {}x{0} for {} clients",
            matrix.n(),
            cfg.num_clients
        )));
    }

    let mut global = prep.model.clone();
    let mut records = Vec::with_capacity(cfg.global_epoch);
    let mut cum_energy = 0.0;
    let mut cum_tx_delay = 0.0;
    let mut cum_local_delay = 0.0;

    for round in 1..=cfg.global_epoch as u64 {
        let mut chains: Vec<Vec<usize>> = match cfg.strategy {
            Strategy::CncOptimized => {
                partition_balanced(&prep.profiles, &prep.delay_model, cfg.subset_count)?
            }
            Strategy::P2pRandomK => {
                let k = cfg.selected_per_round();
                vec![uniform_sample(cfg.num_clients, k, cfg.seed, &[stream::SELECTION, round])]
            }
            Strategy::P2pFullChain | Strategy::P2pTsp => vec![(0..cfg.num_clients).collect()],
            Strategy::FedavgBaseline => {
                return Err(Error::Config("fedavg_baseline is not a p2p strategy".into()))
            }
        };
        // Canonical membership order; the path solver decides the sequence.
        for chain in &mut chains {
            chain.sort_unstable();
        }

        let mut paths = Vec::with_capacity(chains.len());
        let mut hop_costs = Vec::with_capacity(chains.len());
        let mut local_sums = Vec::with_capacity(chains.len());
        let mut chain_data = Vec::with_capacity(chains.len());
        for ids in &chains {
            let sub = matrix.submatrix(ids);
            let (local_path, hop_cost) = match cfg.strategy {
                Strategy::P2pTsp => held_karp_path(&sub)?,
                _ => greedy_backtrack_path(&sub)?,
            };
            let path: Vec<usize> = local_path.iter().map(|&l| ids[l]).collect();
            let local_sum: f64 = path
                .iter()
                .map(|&c| local_delay(&prep.profiles[c], &prep.delay_model))
                .sum();
            let data_volume: usize = path.iter().map(|&c| prep.train_shards[c].len()).sum();
            paths.push(path);
            hop_costs.push(hop_cost);
            local_sums.push(local_sum);
            chain_data.push(data_volume);
        }

        let chain_delay = |e: usize| -> f64 {
            match cfg.p2p.matrix_unit {
                MatrixUnit::Delay => local_sums[e] + hop_costs[e],
                MatrixUnit::Energy => local_sums[e],
            }
        };
        let round_wallclock_s =
            (0..chains.len()).map(chain_delay).fold(0.0, f64::max);
        let max_local = local_sums.iter().copied().fold(0.0, f64::max);
        let min_local = local_sums.iter().copied().fold(f64::INFINITY, f64::min);
        let (sum_tx_energy_j, max_tx_delay_s) = match cfg.p2p.matrix_unit {
            MatrixUnit::Energy => (hop_costs.iter().sum(), 0.0),
            MatrixUnit::Delay => (0.0, hop_costs.iter().copied().fold(0.0, f64::max)),
        };

        let test_accuracy = if cfg.metrics_only {
            0.0
        } else {
            let chain_seed = subseed(cfg.seed, &[stream::LOCAL_TRAIN, round]);
            let mut submodels = Vec::with_capacity(paths.len());
            for path in &paths {
                submodels.push(chain_train(
                    &global,
                    path,
                    &prep.train_shards,
                    &prep.hyper,
                    chain_seed,
                )?);
            }
            global = aggregate_subsets(&submodels, &chain_data)?;
            evaluate(&global, &prep.test_set)?
        };

        cum_energy += sum_tx_energy_j;
        cum_tx_delay += max_tx_delay_s;
        cum_local_delay += max_local;
        records.push(MetricsRecord {
            round: round as u32,
            test_accuracy,
            sum_tx_energy_j,
            max_tx_delay_s,
            max_local_delay_s: max_local,
            delay_spread_s: max_local - min_local,
            round_wallclock_s,
            cum_sum_tx_energy_j: cum_energy,
            cum_max_tx_delay_s: cum_tx_delay,
            cum_max_local_delay_s: cum_local_delay,
        });
    }
    Ok((records, global))
}

/// Dispatches on the configured architecture.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<MetricsRecord>> {
    match cfg.architecture {
        Architecture::Traditional => run_traditional(cfg),
        Architecture::P2p => run_p2p(cfg),
    }
}

/// Mean round wall-clock per client count. The subset count scales with
/// the base config's E / num_clients ratio for the optimized strategy.
pub fn sweep_clients(cfg: &ExperimentConfig, counts: &[usize]) -> Result<Vec<(usize, f64)>> {
    if cfg.architecture != Architecture::P2p {
        return Err(Error::Config("sweep_clients requires architecture=p2p".into()));
    }
    if cfg.p2p.matrix_file.is_some() {
        return Err(Error::Config(
            "sweep_clients regenerates matrices per count; matrix_file is incompatible".into(),
        ));
    }
    let mut rows = Vec::with_capacity(counts.len());
    for &count in counts {
        let mut scaled = cfg.clone();
        scaled.num_clients = count;
        if cfg.strategy == Strategy::CncOptimized {
            let ratio = cfg.subset_count as f64 / cfg.num_clients as f64;
            scaled.subset_count = ((count as f64 * ratio).round() as usize).max(1);
        }
        let records = run_p2p(&scaled)?;
        let mean =
            records.iter().map(|r| r.round_wallclock_s).sum::<f64>() / records.len() as f64;
        rows.push((count, mean));
    }
    Ok(rows)
}
