//! Peer-to-peer architecture: balanced subset partitioning, transmission
//! path planning (greedy with backtracking, plus an exact Hamiltonian
//! oracle), sequential chain training, and sub-model aggregation.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Shard;
use crate::error::{Error, Result};
use crate::model::{sgd_local_train, weighted_average, Hyperparams, ParamVector};
use crate::rng::subseed;
use crate::scheduler::{local_delay, ComputeProfile, DelayModel};

/// Pairwise client-to-client transmission costs. `f64::INFINITY` marks an
/// unreachable pair; the diagonal is always unreachable. Costs may be
/// asymmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsumptionMatrix {
    cost: Vec<Vec<f64>>,
}

impl ConsumptionMatrix {
    pub fn new(mut cost: Vec<Vec<f64>>) -> Result<Self> {
        let n = cost.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty consumption matrix".into()));
        }
        for (i, row) in cost.iter_mut().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, v) in row.iter().enumerate() {
                if v.is_nan() || *v < 0.0 {
                    return Err(Error::InvalidInput(format!("cost[{i}][{j}] = {v} not allowed")));
                }
            }
            row[i] = f64::INFINITY;
        }
        Ok(Self { cost })
    }

    pub fn n(&self) -> usize {
        self.cost.len()
    }

    pub fn at(&self, from: usize, to: usize) -> f64 {
        self.cost[from][to]
    }

    pub fn reachable(&self, from: usize, to: usize) -> bool {
        self.cost[from][to].is_finite()
    }

    /// Restriction to `ids`, re-indexed 0..ids.len() in the given order.
    pub fn submatrix(&self, ids: &[usize]) -> Self {
        let cost = ids
            .iter()
            .map(|&i| ids.iter().map(|&j| self.cost[i][j]).collect())
            .collect();
        Self { cost }
    }

    /// Seeded complete-or-thinned matrix: off-diagonal costs drawn from
    /// U(low, high), each edge independently unreachable with probability
    /// `unreachable_prob`.
    pub fn random(
        n: usize,
        low: f64,
        high: f64,
        unreachable_prob: f64,
        seed: u64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("matrix size must be >= 1".into()));
        }
        if !(low >= 0.0) || !(high >= low) {
            return Err(Error::InvalidInput("need 0 <= low <= high".into()));
        }
        if !(0.0..=1.0).contains(&unreachable_prob) {
            return Err(Error::InvalidInput("unreachable_prob outside [0,1]".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cost = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j || rng.random::<f64>() < unreachable_prob {
                            f64::INFINITY
                        } else {
                            low + (high - low) * rng.random::<f64>()
                        }
                    })
                    .collect()
            })
            .collect();
        Self::new(cost)
    }

    /// Parses the plain-text format: first line n, then n rows of n
    /// whitespace-separated values with `inf` marking unreachable pairs.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("consumption matrix: missing size line".into()))?;
        let n: usize = header
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("consumption matrix: bad size line {header:?}")))?;
        let mut cost = Vec::with_capacity(n);
        for i in 0..n {
            let line = lines.next().ok_or_else(|| {
                Error::Parse(format!("consumption matrix: missing row {i} of {n}"))
            })?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|tok| {
                    if tok == "inf" {
                        Ok(f64::INFINITY)
                    } else {
                        tok.parse::<f64>().map_err(|_| {
                            Error::Parse(format!("consumption matrix: bad value {tok:?} in row {i}"))
                        })
                    }
                })
                .collect::<Result<_>>()?;
            if row.len() != n {
                return Err(Error::Parse(format!(
                    "consumption matrix: row {i} has {} values, expected {n}",
                    row.len()
                )));
            }
            cost.push(row);
        }
        Self::new(cost)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Inverse of [`ConsumptionMatrix::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.n());
        for row in &self.cost {
            let rendered: Vec<String> = row
                .iter()
                .map(|v| if v.is_finite() { format!("{v}") } else { "inf".to_string() })
                .collect();
            let _ = writeln!(out, "{}", rendered.join(" "));
        }
        out
    }
}

/// Longest-processing-time partition into `subset_count` groups with
/// similar local-delay sums: clients sorted by delay descending feed the
/// currently lightest subset (ties by subset index).
pub fn partition_balanced(
    profiles: &[ComputeProfile],
    dm: &DelayModel,
    subset_count: usize,
) -> Result<Vec<Vec<usize>>> {
    if subset_count < 1 {
        return Err(Error::InvalidInput("subset count must be >= 1".into()));
    }
    if subset_count > profiles.len() {
        return Err(Error::InvalidInput(format!(
            "cannot split {} clients into {subset_count} subsets",
            profiles.len()
        )));
    }
    let mut order: Vec<&ComputeProfile> = profiles.iter().collect();
    order.sort_by(|a, b| {
        local_delay(b, dm)
            .partial_cmp(&local_delay(a, dm))
            .unwrap()
            .then(a.client_id.cmp(&b.client_id))
    });
    let mut subsets: Vec<Vec<usize>> = vec![Vec::new(); subset_count];
    let mut sums = vec![0.0f64; subset_count];
    for p in order {
        let lightest = (0..subset_count)
            .min_by(|&a, &b| sums[a].partial_cmp(&sums[b]).unwrap())
            .unwrap();
        subsets[lightest].push(p.client_id);
        sums[lightest] += local_delay(p, dm);
    }
    Ok(subsets)
}

/// Sum of hop costs along `path`, which must visit every client exactly
/// once over reachable hops.
pub fn path_cost(g: &ConsumptionMatrix, path: &[usize]) -> Result<f64> {
    let n = g.n();
    if path.len() != n {
        return Err(Error::InvalidInput(format!(
            "path of {} nodes over a {n}-client matrix",
            path.len()
        )));
    }
    let mut seen = vec![false; n];
    for &v in path {
        if v >= n || seen[v] {
            return Err(Error::InvalidInput("path is not a permutation".into()));
        }
        seen[v] = true;
    }
    let mut total = 0.0;
    for hop in path.windows(2) {
        let c = g.at(hop[0], hop[1]);
        if !c.is_finite() {
            return Err(Error::InvalidInput(format!(
                "unreachable hop {} -> {}",
                hop[0], hop[1]
            )));
        }
        total += c;
    }
    Ok(total)
}

/// First complete path found by cheapest-neighbor-first depth-first
/// search from `start`, backtracking at dead ends.
fn first_complete_from(g: &ConsumptionMatrix, start: usize) -> Option<Vec<usize>> {
    let n = g.n();
    let mut path = vec![start];
    if n == 1 {
        return Some(path);
    }
    let mut visited = vec![false; n];
    visited[start] = true;

    let candidates = |from: usize, visited: &[bool]| -> Vec<usize> {
        let mut next: Vec<usize> = (0..n)
            .filter(|&j| !visited[j] && g.reachable(from, j))
            .collect();
        next.sort_by(|&a, &b| g.at(from, a).partial_cmp(&g.at(from, b)).unwrap().then(a.cmp(&b)));
        next
    };

    // One frame per path node: its expansion list and a cursor into it.
    let mut frames: Vec<(Vec<usize>, usize)> = vec![(candidates(start, &visited), 0)];
    while let Some((options, cursor)) = frames.last_mut() {
        if *cursor < options.len() {
            let next = options[*cursor];
            *cursor += 1;
            visited[next] = true;
            path.push(next);
            if path.len() == n {
                return Some(path);
            }
            frames.push((candidates(next, &visited), 0));
        } else {
            frames.pop();
            if let Some(dead) = path.pop() {
                visited[dead] = false;
            }
        }
    }
    None
}

/// Transmission path via greedy cheapest-neighbor expansion with
/// backtracking: the first complete path found per start client is kept,
/// and the cheapest of those over all starts wins (ties by start id).
pub fn greedy_backtrack_path(g: &ConsumptionMatrix) -> Result<(Vec<usize>, f64)> {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for start in 0..g.n() {
        if let Some(path) = first_complete_from(g, start) {
            let cost = path_cost(g, &path)?;
            if best.as_ref().is_none_or(|(_, b)| cost < *b) {
                best = Some((path, cost));
            }
        }
    }
    best.ok_or(Error::NoFeasiblePath)
}

const HELD_KARP_LIMIT: usize = 15;

/// Exact minimum-cost Hamiltonian path over all start/end pairs, by
/// dynamic programming over vertex subsets. Refuses n > 15. Ties resolve
/// to the lexicographically smallest path.
pub fn held_karp_path(g: &ConsumptionMatrix) -> Result<(Vec<usize>, f64)> {
    let n = g.n();
    if n > HELD_KARP_LIMIT {
        return Err(Error::InvalidInput(format!(
            "held-karp refused: {n} clients exceed the {HELD_KARP_LIMIT}-node guard"
        )));
    }
    if n == 1 {
        return Ok((vec![0], 0.0));
    }

    let full = (1usize << n) - 1;
    // suffix[mask][v]: cheapest path starting at v that visits exactly `mask`.
    let mut suffix = vec![vec![f64::INFINITY; n]; full + 1];
    for v in 0..n {
        suffix[1 << v][v] = 0.0;
    }
    for mask in 1..=full {
        for v in 0..n {
            if mask & (1 << v) == 0 {
                continue;
            }
            let rest = mask ^ (1 << v);
            if rest == 0 {
                continue;
            }
            let mut best = f64::INFINITY;
            for u in 0..n {
                if rest & (1 << u) == 0 {
                    continue;
                }
                let hop = g.at(v, u);
                if hop.is_finite() && suffix[rest][u].is_finite() {
                    let c = hop + suffix[rest][u];
                    if c < best {
                        best = c;
                    }
                }
            }
            suffix[mask][v] = best;
        }
    }

    let mut start = None;
    for v in 0..n {
        if suffix[full][v].is_finite()
            && start.is_none_or(|s: usize| suffix[full][v] < suffix[full][s])
        {
            start = Some(v);
        }
    }
    let start = start.ok_or(Error::NoFeasiblePath)?;

    let mut path = vec![start];
    let mut mask = full;
    let mut v = start;
    while mask != 1 << v {
        let rest = mask ^ (1 << v);
        let stored = suffix[mask][v];
        let mut chosen = None;
        for u in 0..n {
            if rest & (1 << u) == 0 {
                continue;
            }
            let hop = g.at(v, u);
            if hop.is_finite() && hop + suffix[rest][u] == stored {
                chosen = Some(u);
                break;
            }
        }
        let u = chosen.expect("dp table admits a witness");
        path.push(u);
        mask = rest;
        v = u;
    }

    let total = path_cost(g, &path)?;
    Ok((path, total))
}

/// Seed for one client's local training inside a chain; exposed so
/// composition oracles can reproduce chain training step by step.
pub fn chain_client_seed(chain_seed: u64, client_id: usize) -> u64 {
    subseed(chain_seed, &[client_id as u64])
}

/// Trains the model along `path`: each client trains from the previous
/// client's output (the first from `model`) with seed
/// [`chain_client_seed`]`(seed, client)`; returns the final output.
pub fn chain_train(
    model: &ParamVector,
    path: &[usize],
    shards: &[Shard],
    hyper: &Hyperparams,
    seed: u64,
) -> Result<ParamVector> {
    if path.is_empty() {
        return Err(Error::InvalidInput("empty chain".into()));
    }
    let mut w = model.clone();
    for &client in path {
        let shard = shards
            .iter()
            .find(|s| s.client_id == client)
            .ok_or_else(|| Error::InvalidInput(format!("no shard for client {client}")))?;
        w = sgd_local_train(&w, &shard.samples, hyper, chain_client_seed(seed, client))?;
    }
    Ok(w)
}

/// Aggregates one sub-model per subset, weighted by subset data volume.
pub fn aggregate_subsets(submodels: &[ParamVector], subset_data: &[usize]) -> Result<ParamVector> {
    if submodels.len() != subset_data.len() {
        return Err(Error::InvalidInput(format!(
            "{} sub-models for {} subset weights",
            submodels.len(),
            subset_data.len()
        )));
    }
    let weights: Vec<f64> = subset_data.iter().map(|&n| n as f64).collect();
    weighted_average(submodels, &weights)
}
