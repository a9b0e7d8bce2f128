//! Traditional-architecture planning: the local-delay model, power-tiered
//! client sampling, and resource-block assignment solvers with a
//! brute-force oracle.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{tx_delay, tx_energy, uplink_rate, FadingModel, LinkState, RBlock};
use crate::error::{Error, Result};
use crate::rng::subseed;

/// Sentinel cost for padding rows when there are fewer clients than
/// resource blocks; padded pairs never contribute to reported costs.
pub const PAD_SENTINEL: f64 = 1e12;

/// Compute capacity and data volume of one client.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComputeProfile {
    pub client_id: usize,
    /// Work units per second.
    pub capacity: f64,
    pub shard_size: usize,
}

/// Converts data volume and capacity into local training delay:
/// `t = alpha * local_epochs * shard_size / capacity`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayModel {
    pub alpha: f64,
    pub local_epochs: usize,
}

/// Local training delay in seconds.
pub fn local_delay(profile: &ComputeProfile, dm: &DelayModel) -> f64 {
    dm.alpha * dm.local_epochs as f64 * profile.shard_size as f64 / profile.capacity
}

/// Max minus min local delay over a selection.
pub fn delay_spread(selected: &[ComputeProfile], dm: &DelayModel) -> Result<f64> {
    if selected.is_empty() {
        return Err(Error::InvalidInput("delay spread of an empty selection".into()));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in selected {
        let t = local_delay(p, dm);
        lo = lo.min(t);
        hi = hi.max(t);
    }
    Ok(hi - lo)
}

/// A planned round: the selected clients, their resource blocks (empty
/// until assignment runs), and the tier the selection came from.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundPlan {
    pub selected: Vec<usize>,
    pub rb_of: BTreeMap<usize, usize>,
    pub tier_index: usize,
}

/// Client sampling tiered by local training delay.
///
/// All delays are computed and sorted descending (ties by client id);
/// the population splits into `m` contiguous tiers of near-equal
/// cardinality (earlier, slower tiers absorb the remainder). A tier is
/// drawn with probability proportional to its total data volume, then
/// `n` distinct clients are drawn from it by sequential draws weighted
/// by shard size. A drawn tier smaller than `n` yields
/// [`Error::TierTooSmall`], which callers retry under a fresh substream.
pub fn power_tiered_sample(
    profiles: &[ComputeProfile],
    dm: &DelayModel,
    m: usize,
    n: usize,
    seed: u64,
) -> Result<RoundPlan> {
    if m < 1 {
        return Err(Error::InvalidInput("tier count m must be >= 1".into()));
    }
    if profiles.is_empty() {
        return Err(Error::InvalidInput("no client profiles".into()));
    }
    let largest_tier = profiles.len().div_ceil(m);
    if n < 1 || n > largest_tier {
        return Err(Error::InvalidInput(format!(
            "n={n} outside [1, ceil({}/{m})={largest_tier}]",
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

    let base = profiles.len() / m;
    let rem = profiles.len() % m;
    let mut tiers: Vec<&[&ComputeProfile]> = Vec::with_capacity(m);
    let mut cursor = 0;
    for k in 0..m {
        let size = base + usize::from(k < rem);
        tiers.push(&order[cursor..cursor + size]);
        cursor += size;
    }

    let volumes: Vec<f64> = tiers
        .iter()
        .map(|t| t.iter().map(|p| p.shard_size as f64).sum())
        .collect();
    let total: f64 = volumes.iter().sum();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut tier_index = tiers.len() - 1;
    for (k, v) in volumes.iter().enumerate() {
        acc += v;
        if draw < acc {
            tier_index = k;
            break;
        }
    }

    let tier = tiers[tier_index];
    if tier.len() < n {
        return Err(Error::TierTooSmall(format!(
            "tier {tier_index} holds {} clients, need {n}",
            tier.len()
        )));
    }

    let mut pool: Vec<&ComputeProfile> = tier.to_vec();
    let mut selected = Vec::with_capacity(n);
    for _ in 0..n {
        let remaining: f64 = pool.iter().map(|p| p.shard_size as f64).sum();
        let draw = rng.random::<f64>() * remaining;
        let mut acc = 0.0;
        let mut pick = pool.len() - 1;
        for (i, p) in pool.iter().enumerate() {
            acc += p.shard_size as f64;
            if draw < acc {
                pick = i;
                break;
            }
        }
        selected.push(pool.remove(pick).client_id);
    }

    Ok(RoundPlan { selected, rb_of: BTreeMap::new(), tier_index })
}

/// Client-by-resource-block cost matrix, padded square with
/// [`PAD_SENTINEL`] rows when clients are fewer than blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    cost: Vec<Vec<f64>>,
    real_rows: usize,
}

impl CostMatrix {
    /// Builds from one row per client; requires rows <= columns and
    /// finite non-negative entries.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("empty cost matrix".into()));
        }
        let width = rows[0].len();
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidInput("ragged cost matrix".into()));
        }
        if rows.len() > width {
            return Err(Error::InvalidInput(format!(
                "{} clients cannot share {} resource blocks",
                rows.len(),
                width
            )));
        }
        for r in &rows {
            for &v in r {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidInput(format!("cost entry {v} not allowed")));
                }
            }
        }
        let real_rows = rows.len();
        let mut cost = rows;
        while cost.len() < width {
            cost.push(vec![PAD_SENTINEL; width]);
        }
        Ok(Self { cost, real_rows })
    }

    /// Padded (square) dimension.
    pub fn n(&self) -> usize {
        self.cost.len()
    }

    /// Number of client rows before padding.
    pub fn real_rows(&self) -> usize {
        self.real_rows
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.cost[row][col]
    }

    fn real(&self) -> &[Vec<f64>] {
        &self.cost[..self.real_rows]
    }
}

#[cfg(feature = "corrupt-solvers")]
thread_local! {
    static CORRUPT: std::cell::Cell<bool> = const { std::cell::Cell::new(false) };
}

/// Enables the deliberate solver fault on this thread (negative-control
/// builds only).
#[cfg(feature = "corrupt-solvers")]
pub fn corrupt_solvers_for_test(enabled: bool) {
    CORRUPT.with(|c| c.set(enabled));
}

#[cfg(feature = "corrupt-solvers")]
fn corruption_active() -> bool {
    CORRUPT.with(|c| c.get())
}

/// Shortest-augmenting-path assignment (Jonker-Volgenant potentials) on
/// a rectangular matrix with rows <= cols. Returns the column of each row.
fn solve_rect(cost: &[Vec<f64>]) -> Vec<usize> {
    let rows = cost.len();
    let cols = cost[0].len();
    debug_assert!(rows <= cols);

    // job[c] = row matched to column c; column `cols` is the virtual start.
    let mut job: Vec<Option<usize>> = vec![None; cols + 1];
    let mut row_pot = vec![0.0f64; rows];
    let mut col_pot = vec![0.0f64; cols + 1];

    for row in 0..rows {
        let mut col = cols;
        job[col] = Some(row);
        let mut min_to = vec![f64::INFINITY; cols + 1];
        let mut prev: Vec<Option<usize>> = vec![None; cols + 1];
        let mut visited = vec![false; cols + 1];

        while let Some(r) = job[col] {
            visited[col] = true;
            let mut delta = f64::INFINITY;
            let mut next_col = 0;
            for c in 0..cols {
                if !visited[c] {
                    let reduced = cost[r][c] - row_pot[r] - col_pot[c];
                    if reduced < min_to[c] {
                        min_to[c] = reduced;
                        prev[c] = Some(col);
                    }
                    if min_to[c] < delta {
                        delta = min_to[c];
                        next_col = c;
                    }
                }
            }
            for c in 0..=cols {
                if visited[c] {
                    if let Some(rc) = job[c] {
                        row_pot[rc] += delta;
                    }
                    col_pot[c] -= delta;
                } else {
                    min_to[c] -= delta;
                }
            }
            col = next_col;
        }
        while col != cols {
            let pc = prev[col].expect("augmenting path is connected");
            job[col] = job[pc];
            col = pc;
        }
    }

    let mut assign = vec![usize::MAX; rows];
    for c in 0..cols {
        if let Some(r) = job[c] {
            assign[r] = c;
        }
    }
    assign
}

/// Total of an assignment over the real rows, summed in row order.
fn assignment_total(cost: &[Vec<f64>], assign: &[usize]) -> f64 {
    assign.iter().enumerate().map(|(r, &c)| cost[r][c]).sum()
}

/// Optimal total for the subproblem of `rows` (by index) over the columns
/// not yet used.
fn solve_total_sub(cost: &[Vec<f64>], rows: &[usize], used: &[bool]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let free_cols: Vec<usize> = (0..used.len()).filter(|&c| !used[c]).collect();
    let sub: Vec<Vec<f64>> = rows
        .iter()
        .map(|&r| free_cols.iter().map(|&c| cost[r][c]).collect())
        .collect();
    let assign = solve_rect(&sub);
    assignment_total(&sub, &assign)
}

fn totals_match(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Minimum-total perfect assignment of clients to resource blocks via the
/// Hungarian method. Ties break toward the lexicographically smallest
/// assignment vector; padded rows are excluded from the reported total.
pub fn hungarian_assign(costs: &CostMatrix) -> Result<(Vec<usize>, f64)> {
    let cost = costs.real();
    let rows = cost.len();
    let cols = cost[0].len();

    let base = solve_rect(cost);
    let optimal = assignment_total(cost, &base);

    // Re-anchor each row to the smallest column that still completes an
    // optimal assignment, so equal-cost optima resolve deterministically.
    let mut assign = vec![usize::MAX; rows];
    let mut used = vec![false; cols];
    let mut prefix = 0.0;
    for row in 0..rows {
        let rest: Vec<usize> = (row + 1..rows).collect();
        let mut found = false;
        for col in 0..cols {
            if used[col] {
                continue;
            }
            used[col] = true;
            let candidate = prefix + cost[row][col] + solve_total_sub(cost, &rest, &used);
            used[col] = false;
            if totals_match(candidate, optimal) {
                assign[row] = col;
                used[col] = true;
                prefix += cost[row][col];
                found = true;
                break;
            }
        }
        if !found {
            // Float drift beyond the tolerance; fall back to the raw solve.
            return Ok((base.clone(), assignment_total(cost, &base)));
        }
    }

    #[cfg(feature = "corrupt-solvers")]
    if corruption_active() && assign.len() >= 2 {
        assign.swap(0, 1);
    }

    let total = assignment_total(cost, &assign);
    Ok((assign, total))
}

/// Kuhn augmenting-path matching: can every row be matched to a distinct
/// allowed column? `allowed(r, c)` gates edges; `blocked[c]` removes columns.
fn rows_matchable(
    rows: usize,
    cols: usize,
    allowed: &dyn Fn(usize, usize) -> bool,
    blocked: &[bool],
) -> bool {
    let mut col_match: Vec<Option<usize>> = vec![None; cols];

    fn try_assign(
        r: usize,
        cols: usize,
        allowed: &dyn Fn(usize, usize) -> bool,
        blocked: &[bool],
        seen: &mut [bool],
        col_match: &mut [Option<usize>],
    ) -> bool {
        for c in 0..cols {
            if blocked[c] || seen[c] || !allowed(r, c) {
                continue;
            }
            seen[c] = true;
            if col_match[c].is_none()
                || try_assign(col_match[c].unwrap(), cols, allowed, blocked, seen, col_match)
            {
                col_match[c] = Some(r);
                return true;
            }
        }
        false
    }

    for r in 0..rows {
        let mut seen = vec![false; cols];
        if !try_assign(r, cols, allowed, blocked, &mut seen, &mut col_match) {
            return false;
        }
    }
    true
}

/// Minimum-bottleneck perfect assignment: binary search over the sorted
/// distinct costs with bipartite-matching feasibility at each threshold.
/// Ties break toward the lexicographically smallest assignment vector.
pub fn bottleneck_assign(costs: &CostMatrix) -> Result<(Vec<usize>, f64)> {
    let cost = costs.real();
    let rows = cost.len();
    let cols = cost[0].len();

    let mut levels: Vec<f64> = cost.iter().flatten().copied().collect();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup();

    let none = vec![false; cols];
    let feasible = |t: f64| {
        rows_matchable(rows, cols, &|r, c| cost[r][c] <= t, &none)
    };

    let mut lo = 0;
    let mut hi = levels.len() - 1;
    if !feasible(levels[hi]) {
        return Err(Error::InvalidInput("no perfect matching exists".into()));
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(levels[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let threshold = levels[lo];

    let mut assign = vec![usize::MAX; rows];
    let mut used = vec![false; cols];
    for row in 0..rows {
        let mut fixed = false;
        for col in 0..cols {
            if used[col] || cost[row][col] > threshold {
                continue;
            }
            used[col] = true;
            let rest_rows: Vec<usize> = (row + 1..rows).collect();
            let ok = rows_matchable(
                rest_rows.len(),
                cols,
                &|ri, c| cost[rest_rows[ri]][c] <= threshold,
                &used,
            );
            if ok {
                assign[row] = col;
                fixed = true;
                break;
            }
            used[col] = false;
        }
        debug_assert!(fixed, "threshold was verified feasible");
        if !fixed {
            return Err(Error::InvalidInput("matching reconstruction failed".into()));
        }
    }

    let max = assign
        .iter()
        .enumerate()
        .map(|(r, &c)| cost[r][c])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((assign, max))
}

/// Objective for [`brute_force_assign`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignObjective {
    Sum,
    Max,
}

/// Exhaustive-permutation assignment oracle; refuses matrices larger
/// than 9 on a side. First optimum in lexicographic order wins ties.
pub fn brute_force_assign(
    costs: &CostMatrix,
    objective: AssignObjective,
) -> Result<(Vec<usize>, f64)> {
    if costs.n() > 9 {
        return Err(Error::InvalidInput(format!(
            "brute force refused: dimension {} exceeds 9",
            costs.n()
        )));
    }
    let cost = costs.real();
    let rows = cost.len();
    let cols = cost[0].len();

    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut assign = vec![usize::MAX; rows];
    let mut used = vec![false; cols];

    fn recurse(
        row: usize,
        rows: usize,
        cols: usize,
        cost: &[Vec<f64>],
        objective: AssignObjective,
        assign: &mut Vec<usize>,
        used: &mut Vec<bool>,
        best: &mut Option<(Vec<usize>, f64)>,
    ) {
        if row == rows {
            let value = match objective {
                AssignObjective::Sum => {
                    assign.iter().enumerate().map(|(r, &c)| cost[r][c]).sum()
                }
                AssignObjective::Max => assign
                    .iter()
                    .enumerate()
                    .map(|(r, &c)| cost[r][c])
                    .fold(f64::NEG_INFINITY, f64::max),
            };
            match best {
                Some((_, b)) if value >= *b => {}
                _ => *best = Some((assign.clone(), value)),
            }
            return;
        }
        for c in 0..cols {
            if !used[c] {
                used[c] = true;
                assign[row] = c;
                recurse(row + 1, rows, cols, cost, objective, assign, used, best);
                used[c] = false;
            }
        }
    }

    recurse(0, rows, cols, cost, objective, &mut assign, &mut used, &mut best);
    best.ok_or_else(|| Error::InvalidInput("empty assignment problem".into()))
}

/// Energy cost matrix: entry (i, k) is the energy client i spends to push
/// the payload through resource block k.
pub fn build_energy_cost_matrix(
    links: &[LinkState],
    rbs: &[RBlock],
    payload_bytes: u64,
    fading: FadingModel,
    seed: u64,
) -> Result<CostMatrix> {
    let rows = per_link_rows(links, rbs, payload_bytes, fading, seed, true)?;
    CostMatrix::new(rows)
}

/// Delay variant of [`build_energy_cost_matrix`].
pub fn build_delay_cost_matrix(
    links: &[LinkState],
    rbs: &[RBlock],
    payload_bytes: u64,
    fading: FadingModel,
    seed: u64,
) -> Result<CostMatrix> {
    let rows = per_link_rows(links, rbs, payload_bytes, fading, seed, false)?;
    CostMatrix::new(rows)
}

fn per_link_rows(
    links: &[LinkState],
    rbs: &[RBlock],
    payload_bytes: u64,
    fading: FadingModel,
    seed: u64,
    energy: bool,
) -> Result<Vec<Vec<f64>>> {
    links
        .iter()
        .enumerate()
        .map(|(i, link)| {
            rbs.iter()
                .enumerate()
                .map(|(k, rb)| {
                    let rate =
                        uplink_rate(link, rb, fading, subseed(seed, &[i as u64, k as u64]));
                    let delay = tx_delay(payload_bytes, rate)?;
                    Ok(if energy { tx_energy(link, delay) } else { delay })
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::dbm_per_hz_to_w_per_hz;
    use crate::rng::seeded_rng;

    fn square(entries: &[&[f64]]) -> CostMatrix {
        CostMatrix::new(entries.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> CostMatrix {
        CostMatrix::new(
            (0..n)
                .map(|_| (0..n).map(|_| rng.random::<f64>()).collect())
                .collect(),
        )
        .unwrap()
    }

    fn profile(id: usize, capacity: f64, shard: usize) -> ComputeProfile {
        ComputeProfile { client_id: id, capacity, shard_size: shard }
    }

    #[test]
    fn local_delay_reference_point() {
        let dm = DelayModel { alpha: 4.0 / 600.0, local_epochs: 1 };
        let p = profile(0, 1.0, 600);
        assert!((local_delay(&p, &dm) - 4.0).abs() < 1e-12);

        let dm2 = DelayModel { alpha: 4.0 / 600.0, local_epochs: 2 };
        assert!((local_delay(&p, &dm2) - 8.0).abs() < 1e-12);

        let fast = profile(0, 2.0, 600);
        assert!((local_delay(&fast, &dm) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn spread_examples() {
        let dm = DelayModel { alpha: 4.0 / 600.0, local_epochs: 1 };
        let single = [profile(0, 1.0, 600)];
        assert_eq!(delay_spread(&single, &dm).unwrap(), 0.0);

        let pair = [profile(0, 1.0, 600), profile(1, 0.25, 600)];
        assert!((delay_spread(&pair, &dm).unwrap() - 12.0).abs() < 1e-12);
        assert!(delay_spread(&[], &dm).is_err());
    }

    #[test]
    fn tiered_sampling_stays_inside_one_tier() {
        // Four exact capacity tiers of 25 clients each; equal shards.
        let profiles: Vec<ComputeProfile> = (0..100)
            .map(|i| profile(i, (i / 25 + 1) as f64, 600))
            .collect();
        let dm = DelayModel { alpha: 4.0 / 600.0, local_epochs: 1 };
        for seed in 0..100 {
            let plan = power_tiered_sample(&profiles, &dm, 4, 10, seed).unwrap();
            assert_eq!(plan.selected.len(), 10);
            let sel: Vec<ComputeProfile> =
                plan.selected.iter().map(|&id| profiles[id]).collect();
            assert_eq!(delay_spread(&sel, &dm).unwrap(), 0.0);
            let tiers: Vec<usize> = plan.selected.iter().map(|&id| id / 25).collect();
            assert!(tiers.iter().all(|&t| t == tiers[0]));
        }
    }

    #[test]
    fn tier_frequencies_track_data_volume() {
        // Twelve clients, three tiers; shard sizes give P = (2/3, 1/6, 1/6).
        let shards = [10, 10, 10, 10, 4, 3, 2, 1, 4, 3, 2, 1];
        let profiles: Vec<ComputeProfile> = shards
            .iter()
            .enumerate()
            .map(|(i, &s)| profile(i, s as f64 * (2f64).powi(i as i32), s))
            .collect();
        let dm = DelayModel { alpha: 1.0, local_epochs: 1 };
        let mut counts = [0usize; 3];
        for seed in 0..20_000 {
            let plan = power_tiered_sample(&profiles, &dm, 3, 1, seed).unwrap();
            counts[plan.tier_index] += 1;
        }
        for (count, expect) in counts.iter().zip([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]) {
            let freq = *count as f64 / 20_000.0;
            assert!((freq - expect).abs() < 0.02, "freq {freq} vs {expect}");
        }
    }

    #[test]
    fn singleton_tiers_follow_shard_weights() {
        let shards = [1usize, 2, 3, 4];
        let profiles: Vec<ComputeProfile> = shards
            .iter()
            .enumerate()
            .map(|(i, &s)| profile(i, (i + 1) as f64, s))
            .collect();
        let dm = DelayModel { alpha: 1.0, local_epochs: 1 };
        let mut counts = [0usize; 4];
        for seed in 0..20_000 {
            let plan = power_tiered_sample(&profiles, &dm, 4, 1, seed).unwrap();
            counts[plan.selected[0]] += 1;
        }
        for (id, &s) in shards.iter().enumerate() {
            let freq = counts[id] as f64 / 20_000.0;
            let expect = s as f64 / 10.0;
            assert!((freq - expect).abs() < 0.02, "client {id}: {freq} vs {expect}");
        }
    }

    #[test]
    fn degenerate_single_tier_allows_everyone() {
        let profiles: Vec<ComputeProfile> = (0..10).map(|i| profile(i, 1.0, 5)).collect();
        let dm = DelayModel { alpha: 1.0, local_epochs: 1 };
        let plan = power_tiered_sample(&profiles, &dm, 1, 4, 3).unwrap();
        assert_eq!(plan.tier_index, 0);
        assert_eq!(plan.selected.len(), 4);
        let mut unique = plan.selected.clone();
        unique.sort_unstable();
        unique.dedup();
        assert_eq!(unique.len(), 4);
    }

    #[test]
    fn sampling_is_deterministic_and_validates() {
        let profiles: Vec<ComputeProfile> = (0..9).map(|i| profile(i, 1.0, 5)).collect();
        let dm = DelayModel { alpha: 1.0, local_epochs: 1 };
        let a = power_tiered_sample(&profiles, &dm, 3, 2, 7).unwrap();
        let b = power_tiered_sample(&profiles, &dm, 3, 2, 7).unwrap();
        assert_eq!(a, b);
        assert!(power_tiered_sample(&profiles, &dm, 0, 1, 0).is_err());
        assert!(power_tiered_sample(&profiles, &dm, 3, 4, 0).is_err());
    }

    #[test]
    fn hungarian_small_cases() {
        let (assign, total) = hungarian_assign(&square(&[&[1.0, 2.0], &[2.0, 1.0]])).unwrap();
        assert_eq!(assign, vec![0, 1]);
        assert_eq!(total, 2.0);

        let (assign, total) = hungarian_assign(&square(&[&[0.0, 9.0], &[9.0, 0.0]])).unwrap();
        assert_eq!(assign, vec![0, 1]);
        assert_eq!(total, 0.0);
    }

    #[test]
    fn hungarian_matches_brute_force_on_random_6x6() {
        let mut rng = seeded_rng(100, &[]);
        for _ in 0..200 {
            let m = random_matrix(6, &mut rng);
            let (ha, ht) = hungarian_assign(&m).unwrap();
            let (ba, bt) = brute_force_assign(&m, AssignObjective::Sum).unwrap();
            assert_eq!(ha, ba);
            assert_eq!(ht, bt);
        }
    }

    #[test]
    fn hungarian_matches_brute_force_on_binary_sweep() {
        for bits in 0..512u32 {
            let rows: Vec<Vec<f64>> = (0..3)
                .map(|r| (0..3).map(|c| f64::from(bits >> (r * 3 + c) & 1)).collect())
                .collect();
            let m = CostMatrix::new(rows).unwrap();
            let (ha, ht) = hungarian_assign(&m).unwrap();
            let (ba, bt) = brute_force_assign(&m, AssignObjective::Sum).unwrap();
            assert_eq!(ha, ba, "assignments differ for sweep case {bits}");
            assert_eq!(ht, bt);
        }
    }

    #[test]
    fn hungarian_dominates_random_permutations() {
        let mut rng = seeded_rng(200, &[]);
        for _ in 0..20 {
            let m = random_matrix(7, &mut rng);
            let (_, ht) = hungarian_assign(&m).unwrap();
            let mut perm: Vec<usize> = (0..7).collect();
            for _ in 0..1000 {
                crate::model::shuffle(&mut perm, &mut rng);
                let total: f64 = perm.iter().enumerate().map(|(r, &c)| m.at(r, c)).sum();
                assert!(ht <= total + 1e-12);
            }
        }
    }

    #[test]
    fn bottleneck_small_cases() {
        let (_, max) = bottleneck_assign(&square(&[&[1.0, 2.0], &[2.0, 1.0]])).unwrap();
        assert_eq!(max, 1.0);
        let (assign, max) = bottleneck_assign(&square(&[&[5.0, 1.0], &[1.0, 5.0]])).unwrap();
        assert_eq!(assign, vec![1, 0]);
        assert_eq!(max, 1.0);
    }

    #[test]
    fn bottleneck_matches_brute_force_on_random_5x5() {
        let mut rng = seeded_rng(300, &[]);
        for _ in 0..200 {
            let m = random_matrix(5, &mut rng);
            let (ba, bmax) = bottleneck_assign(&m).unwrap();
            let (oa, omax) = brute_force_assign(&m, AssignObjective::Max).unwrap();
            assert_eq!(ba, oa);
            assert_eq!(bmax, omax);

            let (ha, _) = hungarian_assign(&m).unwrap();
            let hmax = ha.iter().enumerate().map(|(r, &c)| m.at(r, c)).fold(0.0, f64::max);
            assert!(bmax <= hmax + 1e-12);
        }
    }

    #[test]
    fn bottleneck_matches_brute_force_on_binary_sweep() {
        for bits in 0..512u32 {
            let rows: Vec<Vec<f64>> = (0..3)
                .map(|r| (0..3).map(|c| f64::from(bits >> (r * 3 + c) & 1)).collect())
                .collect();
            let m = CostMatrix::new(rows).unwrap();
            let (ba, bmax) = bottleneck_assign(&m).unwrap();
            let (oa, omax) = brute_force_assign(&m, AssignObjective::Max).unwrap();
            assert_eq!(ba, oa, "assignments differ for sweep case {bits}");
            assert_eq!(bmax, omax);
        }
    }

    #[test]
    fn brute_force_guards_dimension() {
        let mut rng = seeded_rng(400, &[]);
        let m = random_matrix(10, &mut rng);
        assert!(brute_force_assign(&m, AssignObjective::Sum).is_err());
        let one = square(&[&[3.5]]);
        let (a, t) = brute_force_assign(&one, AssignObjective::Sum).unwrap();
        assert_eq!((a, t), (hungarian_assign(&one).unwrap().0, 3.5));
    }

    #[test]
    fn rectangular_padding_excludes_sentinel() {
        let m = CostMatrix::new(vec![vec![5.0, 1.0, 3.0], vec![2.0, 6.0, 4.0]]).unwrap();
        assert_eq!(m.n(), 3);
        assert_eq!(m.real_rows(), 2);
        assert_eq!(m.at(2, 0), PAD_SENTINEL);
        let (assign, total) = hungarian_assign(&m).unwrap();
        assert_eq!(assign, vec![1, 0]);
        assert_eq!(total, 3.0);
        assert!(CostMatrix::new(vec![vec![1.0], vec![2.0]]).is_err());
    }

    #[test]
    fn cost_matrix_from_table_parameters() {
        let noise = dbm_per_hz_to_w_per_hz(-174.0);
        let link = LinkState::new(100.0, 1.0, 0.01, noise).unwrap();
        let rb = RBlock::new(0, 1e6, 1e-8).unwrap();
        let m = build_energy_cost_matrix(
            &[link],
            &[rb],
            635_437,
            FadingModel::Deterministic,
            0,
        )
        .unwrap();
        assert_eq!((m.n(), m.real_rows()), (1, 1));
        assert!((m.at(0, 0) - 7.636e-3).abs() / 7.636e-3 < 1e-3);

        // Two identical clients produce identical rows.
        let m2 = build_energy_cost_matrix(
            &[link, link],
            &[rb, RBlock::new(1, 1e6, 1.05e-8).unwrap()],
            635_437,
            FadingModel::Deterministic,
            0,
        )
        .unwrap();
        assert_eq!(m2.at(0, 0), m2.at(1, 0));
        assert_eq!(m2.at(0, 1), m2.at(1, 1));

        let d = build_delay_cost_matrix(
            &[link],
            &[rb],
            635_437,
            FadingModel::Deterministic,
            0,
        )
        .unwrap();
        assert!((m.at(0, 0) - 0.01 * d.at(0, 0)).abs() < 1e-15);
    }
}
