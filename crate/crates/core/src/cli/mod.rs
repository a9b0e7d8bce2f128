//! Command implementations behind the binary: configured runs, strategy
//! comparisons, solver-vs-oracle sweeps, and SVG plotting.

pub mod config;
pub mod plot;
pub mod report;

use std::path::{Path, PathBuf};

use rand::Rng;

use crate::data::Sample;
use crate::engine::{self, ExperimentConfig, MetricsRecord};
use crate::error::{Error, Result};
use crate::model;
use crate::p2p::{greedy_backtrack_path, held_karp_path, ConsumptionMatrix};
use crate::rng::seeded_rng;
use crate::scheduler::{brute_force_assign, bottleneck_assign, hungarian_assign, AssignObjective, CostMatrix};

/// Inputs shared by `run` and `compare`.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub preset: Option<String>,
    pub config_path: Option<PathBuf>,
    pub strategy: Option<String>,
    pub seed: Option<u64>,
    /// Raw KEY=VALUE overrides, applied last.
    pub overrides: Vec<String>,
    pub out_dir: PathBuf,
}

/// Everything needed to reproduce a run and find its outputs.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config_path: Option<PathBuf>,
    pub preset: Option<String>,
    pub resolved: ExperimentConfig,
    pub out_dir: PathBuf,
    pub artifacts: Vec<PathBuf>,
}

impl RunManifest {
    /// Renders as a config file (comments carry provenance), so
    /// `run --config <manifest>` reproduces the run exactly.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if let Some(p) = &self.preset {
            out.push_str(&format!("# preset: {p}\n"));
        }
        if let Some(p) = &self.config_path {
            out.push_str(&format!("# config: {}\n", p.display()));
        }
        for a in &self.artifacts {
            out.push_str(&format!("# artifact: {}\n", a.display()));
        }
        out.push_str(&config::render_config(&self.resolved));
        out
    }
}

fn override_layer(opts: &RunOptions) -> Result<Vec<(String, String)>> {
    let mut layer = Vec::new();
    for raw in &opts.overrides {
        let (k, v) = raw.split_once('=').ok_or_else(|| {
            Error::Config(format!("override {raw:?} is not KEY=VALUE"))
        })?;
        layer.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(s) = &opts.strategy {
        layer.push(("strategy".into(), s.clone()));
    }
    if let Some(s) = opts.seed {
        layer.push(("seed".into(), s.to_string()));
    }
    Ok(layer)
}

fn resolve_config(opts: &RunOptions) -> Result<(ExperimentConfig, String)> {
    let mut layers = Vec::new();
    if let Some(name) = &opts.preset {
        layers.push(config::preset_pairs(name)?);
    }
    if let Some(path) = &opts.config_path {
        layers.push(config::parse_kv(&std::fs::read_to_string(path)?)?);
    }
    layers.push(override_layer(opts)?);
    let cfg = config::resolve(&layers)?;
    let label = opts
        .preset
        .clone()
        .unwrap_or_else(|| format!("cfg{}", config::config_hash(&cfg)));
    Ok((cfg, label))
}

/// Result of a single run: artifact paths and the summary line inputs.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub rounds: usize,
    pub final_accuracy: f64,
    pub total_energy_j: f64,
    pub total_delay_s: f64,
}

impl RunSummary {
    pub fn line(&self) -> String {
        format!(
            "final_accuracy={} total_energy_j={} total_delay_s={} rounds={} csv={}",
            report::format_float(self.final_accuracy),
            report::format_float(self.total_energy_j),
            report::format_float(self.total_delay_s),
            self.rounds,
            self.csv_path.display()
        )
    }
}

/// Executes one configured run and writes its CSV and manifest.
pub fn cmd_run(opts: &RunOptions) -> Result<RunSummary> {
    let (cfg, label) = resolve_config(opts)?;
    let records = engine::run(&cfg)?;

    std::fs::create_dir_all(&opts.out_dir)?;
    let base = format!("run_{label}_{}_seed{}", cfg.strategy.as_str(), cfg.seed);
    let csv_path = opts.out_dir.join(format!("{base}.csv"));
    let manifest_path = opts.out_dir.join(format!("{base}.manifest"));

    let strategy = cfg.strategy.as_str();
    std::fs::write(&csv_path, report::render_csv(records.iter().map(|r| (strategy, r))))?;
    let manifest = RunManifest {
        config_path: opts.config_path.clone(),
        preset: opts.preset.clone(),
        resolved: cfg.clone(),
        out_dir: opts.out_dir.clone(),
        artifacts: vec![csv_path.clone()],
    };
    std::fs::write(&manifest_path, manifest.render())?;

    let last = records.last().expect("validated configs run at least one round");
    Ok(RunSummary {
        csv_path,
        manifest_path,
        rounds: records.len(),
        final_accuracy: last.test_accuracy,
        total_energy_j: last.cum_sum_tx_energy_j,
        total_delay_s: last.cum_max_tx_delay_s,
    })
}

/// Result of a comparison run.
#[derive(Debug, Clone)]
pub struct CompareSummary {
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub finals: Vec<(String, f64)>,
}

/// Runs every strategy under the same seed and emits one long-format CSV
/// with rows interleaved by round.
pub fn cmd_compare(opts: &RunOptions, strategies: &[String]) -> Result<CompareSummary> {
    if strategies.len() < 2 {
        return Err(Error::Config(format!(
            "compare needs at least two strategies, got {}",
            strategies.len()
        )));
    }
    let mut resolved = Vec::with_capacity(strategies.len());
    let mut label = None;
    for s in strategies {
        let mut per = opts.clone();
        per.strategy = Some(s.clone());
        let (cfg, l) = resolve_config(&per)?;
        label.get_or_insert(l);
        resolved.push(cfg);
    }
    let label = label.expect("at least two strategies");

    let mut all: Vec<(String, Vec<MetricsRecord>)> = Vec::with_capacity(resolved.len());
    for cfg in &resolved {
        all.push((cfg.strategy.as_str().to_string(), engine::run(cfg)?));
    }

    std::fs::create_dir_all(&opts.out_dir)?;
    let joined: Vec<&str> = strategies.iter().map(|s| s.as_str()).collect();
    let base = format!("compare_{label}_{}_seed{}", joined.join("-"), resolved[0].seed);
    let csv_path = opts.out_dir.join(format!("{base}.csv"));
    let manifest_path = opts.out_dir.join(format!("{base}.manifest"));

    let rounds = all.iter().map(|(_, r)| r.len()).max().unwrap_or(0);
    let mut rows: Vec<(&str, &MetricsRecord)> = Vec::new();
    for round in 0..rounds {
        for (name, records) in &all {
            if let Some(r) = records.get(round) {
                rows.push((name.as_str(), r));
            }
        }
    }
    std::fs::write(&csv_path, report::render_csv(rows))?;
    let manifest = RunManifest {
        config_path: opts.config_path.clone(),
        preset: opts.preset.clone(),
        resolved: resolved[0].clone(),
        out_dir: opts.out_dir.clone(),
        artifacts: vec![csv_path.clone()],
    };
    std::fs::write(&manifest_path, manifest.render())?;

    let finals = all
        .iter()
        .map(|(name, records)| {
            (name.clone(), records.last().map_or(0.0, |r| r.test_accuracy))
        })
        .collect();
    Ok(CompareSummary { csv_path, manifest_path, finals })
}

/// One solver-vs-oracle sweep result.
#[derive(Debug, Clone)]
pub struct OracleLine {
    pub name: &'static str,
    pub passed: usize,
    pub total: usize,
}

/// Outcome of `oracle-check`.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub lines: Vec<OracleLine>,
    pub vacuous: bool,
}

impl OracleReport {
    pub fn all_passed(&self) -> bool {
        self.lines.iter().all(|l| l.passed == l.total)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        if self.vacuous {
            out.push_str("warning: trials=0, every sweep passes vacuously\n");
        }
        for l in &self.lines {
            let verdict = if l.passed == l.total { "exact" } else { "MISMATCH" };
            out.push_str(&format!("{}: {}/{} {}\n", l.name, l.passed, l.total, verdict));
        }
        out
    }
}

fn random_cost_matrix(n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> CostMatrix {
    CostMatrix::new((0..n).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect())
        .expect("random entries are valid")
}

/// Central finite differences of the cross-entropy loss; independent of
/// the analytic gradient path.
fn fd_gradient(params: &model::ParamVector, batch: &[Sample], step: f64) -> Result<Vec<f64>> {
    let mut probe = params.clone();
    let mut out = Vec::with_capacity(params.values.len());
    for i in 0..params.values.len() {
        let orig = probe.values[i];
        probe.values[i] = orig + step;
        let up = model::forward_loss(&probe, batch)?;
        probe.values[i] = orig - step;
        let down = model::forward_loss(&probe, batch)?;
        probe.values[i] = orig;
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

/// Runs the solver-vs-oracle sweeps: Hungarian and bottleneck against the
/// exhaustive assignment oracle, the greedy path against Held-Karp, and
/// the analytic gradient against central finite differences.
pub fn cmd_oracle_check(sizes: &[usize], trials: usize, seed: u64) -> Result<OracleReport> {
    if sizes.is_empty() {
        return Err(Error::Config("oracle-check needs at least one size".into()));
    }
    for &s in sizes {
        if !(1..=9).contains(&s) {
            return Err(Error::Config(format!(
                "oracle size {s} outside the brute-force guard [1, 9]"
            )));
        }
    }

    let total = trials * sizes.len();
    let mut hungarian_ok = 0;
    let mut bottleneck_ok = 0;
    let mut path_ok = 0;
    let mut rng = seeded_rng(seed, &[]);
    for &size in sizes {
        for _ in 0..trials {
            let m = random_cost_matrix(size, &mut rng);
            let (ha, ht) = hungarian_assign(&m)?;
            let (ba, bt) = brute_force_assign(&m, AssignObjective::Sum)?;
            if ha == ba && ht == bt {
                hungarian_ok += 1;
            }

            let (xa, xt) = bottleneck_assign(&m)?;
            let (ya, yt) = brute_force_assign(&m, AssignObjective::Max)?;
            if xa == ya && xt == yt {
                bottleneck_ok += 1;
            }

            let g = ConsumptionMatrix::random(size, 1.0, 10.0, 0.0, rng.random())?;
            let (gp, gc) = greedy_backtrack_path(&g)?;
            let (_, hc) = held_karp_path(&g)?;
            let mut sorted = gp.clone();
            sorted.sort_unstable();
            let valid = sorted == (0..size).collect::<Vec<_>>();
            if valid && gc >= hc {
                path_ok += 1;
            }
        }
    }

    let mut gradient_ok = 0;
    for case in 0..trials {
        let hidden = if case % 2 == 0 { None } else { Some(4) };
        let mut params = model::init_model(seed ^ case as u64, 5, 3, hidden)?;
        for v in &mut params.values {
            *v = rng.random_range(-0.5..0.5);
        }
        let batch: Vec<Sample> = (0..6)
            .map(|_| Sample {
                features: (0..5).map(|_| rng.random_range(-1.0..1.0)).collect(),
                label: rng.random_range(0..3),
            })
            .collect();
        let analytic = model::gradient(&params, &batch)?;
        let fd = fd_gradient(&params, &batch, 1e-5)?;
        let worst = analytic
            .values
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1e-6))
            .fold(0.0, f64::max);
        if worst < 1e-4 {
            gradient_ok += 1;
        }
    }

    Ok(OracleReport {
        lines: vec![
            OracleLine { name: "hungarian", passed: hungarian_ok, total },
            OracleLine { name: "bottleneck", passed: bottleneck_ok, total },
            OracleLine { name: "greedy_vs_held_karp", passed: path_ok, total },
            OracleLine { name: "gradient_fd", passed: gradient_ok, total: trials },
        ],
        vacuous: trials == 0,
    })
}

/// Plots one CSV field against another; returns whether the body was empty.
pub fn cmd_plot(csv: &Path, x_field: &str, y_field: &str, out_svg: &Path) -> Result<bool> {
    let table = report::CsvTable::load(csv)?;
    let (svg, empty) = plot::render_svg(&table, x_field, y_field)?;
    if let Some(parent) = out_svg.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(out_svg, svg)?;
    Ok(empty)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_check_passes_and_counts() {
        let report = cmd_oracle_check(&[4], 25, 1).unwrap();
        assert!(report.all_passed(), "{}", report.render());
        assert!(!report.vacuous);
        let rendered = report.render();
        assert!(rendered.contains("hungarian: 25/25 exact"), "{rendered}");
        assert!(rendered.contains("gradient_fd: 25/25 exact"), "{rendered}");
    }

    #[test]
    fn oracle_check_zero_trials_is_vacuous() {
        let report = cmd_oracle_check(&[3], 0, 1).unwrap();
        assert!(report.all_passed());
        assert!(report.vacuous);
        assert!(report.render().contains("warning"));
    }

    #[test]
    fn oracle_check_guards_sizes() {
        assert!(cmd_oracle_check(&[10], 5, 1).is_err());
        assert!(cmd_oracle_check(&[], 5, 1).is_err());
    }

    #[cfg(feature = "corrupt-solvers")]
    #[test]
    fn corrupted_solver_trips_the_oracle() {
        crate::scheduler::corrupt_solvers_for_test(true);
        let report = cmd_oracle_check(&[4], 10, 1).unwrap();
        crate::scheduler::corrupt_solvers_for_test(false);
        assert!(!report.all_passed(), "corruption went undetected");
    }
}
