//! Parameter sweeps over the simulators, written out as tidy CSV with a
//! JSON sidecar holding the fully resolved spec.
//!
//! Grid point `g`, replication `r` draws from
//! `stream_seed(master_seed, key(g), r)`. Keys leave out the beamwidth and
//! the protocol variant, so curves that differ only in those share their
//! random numbers and compare with low variance.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conflict::{collision_domain_histogram, estimate_collision_probability, DomainMode};
use crate::csma::{
    channel_utilization, run_contention_experiment, ContentionConfig, ProtocolVariant,
};
use crate::error::{Error, Result};
use crate::mac::{
    find_optimal_p, run_slotted_aloha_on_map, run_tdma_on_map, AlohaConfig, MacMetrics, SlotConfig,
    TrafficConfig,
};
use crate::radio::{InterferenceMap, RadioModel};
use crate::scenario::{PowerPolicy, Scenario, PRESET_LINK_LENGTH_MAX};
use crate::seed::{replication_seed, stream_seed};
use crate::stats::{wilson_interval, RunningStats};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    CollisionProbability,
    OptimalP,
    AlohaVsTdmaThroughput,
    ThroughputDelayCurve,
    CollisionDomains,
    CnBackoff,
    UtilizationTable,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::CollisionProbability,
        ExperimentKind::OptimalP,
        ExperimentKind::AlohaVsTdmaThroughput,
        ExperimentKind::ThroughputDelayCurve,
        ExperimentKind::CollisionDomains,
        ExperimentKind::CnBackoff,
        ExperimentKind::UtilizationTable,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::CollisionProbability => "collision_probability",
            ExperimentKind::OptimalP => "optimal_p",
            ExperimentKind::AlohaVsTdmaThroughput => "aloha_vs_tdma_throughput",
            ExperimentKind::ThroughputDelayCurve => "throughput_delay_curve",
            ExperimentKind::CollisionDomains => "collision_domains",
            ExperimentKind::CnBackoff => "cn_backoff",
            ExperimentKind::UtilizationTable => "utilization_table",
        }
    }

    fn uses_network(&self) -> bool {
        !matches!(
            self,
            ExperimentKind::CnBackoff | ExperimentKind::UtilizationTable
        )
    }

    fn uses_p_grid(&self) -> bool {
        matches!(
            self,
            ExperimentKind::CollisionProbability
                | ExperimentKind::OptimalP
                | ExperimentKind::AlohaVsTdmaThroughput
                | ExperimentKind::ThroughputDelayCurve
        )
    }
}

/// Everything about the network except link density and beamwidth, which
/// come from the sweep grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub arena_width: f64,
    pub arena_height: f64,
    pub obstacle_density: f64,
    /// `None` means the aligned range of the configured radio.
    pub link_length_max: Option<f64>,
    pub power_policy: PowerPolicy,
    pub radio: RadioModel,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            arena_width: 10.0,
            arena_height: 10.0,
            obstacle_density: 0.25,
            link_length_max: Some(PRESET_LINK_LENGTH_MAX),
            power_policy: PowerPolicy::MatchRange,
            radio: RadioModel::default(),
        }
    }
}

impl NetworkConfig {
    pub fn scenario(&self, link_density: f64, beamwidth_deg: f64) -> Scenario {
        Scenario {
            arena_width: self.arena_width,
            arena_height: self.arena_height,
            link_density,
            obstacle_density: self.obstacle_density,
            beamwidth_deg,
            link_length_max: self.link_length_max,
            power_policy: self.power_policy,
            fixed_link_count: None,
            radio: self.radio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Links per m^2.
    #[serde(default)]
    pub densities: Vec<f64>,
    #[serde(default)]
    pub beamwidths_deg: Vec<f64>,
    /// Transmit probabilities: the activation probability for collision
    /// probability, the search grid for the MAC kinds.
    #[serde(default)]
    pub p_grid: Vec<f64>,
    #[serde(default)]
    pub blockage_probs: Vec<f64>,
    /// Bytes.
    #[serde(default)]
    pub payload_sizes: Vec<u64>,
    #[serde(default = "default_n_devices")]
    pub n_devices: Vec<usize>,
    pub replications: u64,
    pub master_seed: u64,
    pub output_path: PathBuf,
    /// Simulated time per MAC run, seconds.
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    /// Replications of the saturated p* search behind the MAC kinds.
    #[serde(default = "default_search_replications")]
    pub search_replications: u64,
    #[serde(default = "default_search_slots")]
    pub search_slots: u64,
    #[serde(default)]
    pub domain_mode: DomainMode,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub slot: SlotConfig,
    #[serde(default)]
    pub traffic: TrafficConfig,
    #[serde(default)]
    pub contention: ContentionConfig,
}

fn default_n_devices() -> Vec<usize> {
    vec![20]
}

fn default_duration() -> f64 {
    1.0
}

fn default_search_replications() -> u64 {
    200
}

fn default_search_slots() -> u64 {
    2_000
}

const FIG2_DENSITIES: [f64; 7] = [0.02, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0];
const FIG2_BEAMWIDTHS: [f64; 7] = [5.0, 10.0, 15.0, 25.0, 45.0, 90.0, 360.0];

fn p_steps() -> Vec<f64> {
    (1..=20).map(|i| f64::from(i) * 0.05).collect()
}

impl ExperimentSpec {
    /// A spec with every grid empty; fill in what the kind needs.
    pub fn new(kind: ExperimentKind, output_path: impl Into<PathBuf>) -> Self {
        Self {
            kind,
            densities: Vec::new(),
            beamwidths_deg: Vec::new(),
            p_grid: Vec::new(),
            blockage_probs: Vec::new(),
            payload_sizes: Vec::new(),
            n_devices: default_n_devices(),
            replications: 1,
            master_seed: 0,
            output_path: output_path.into(),
            duration_s: default_duration(),
            search_replications: default_search_replications(),
            search_slots: default_search_slots(),
            domain_mode: DomainMode::default(),
            network: NetworkConfig::default(),
            slot: SlotConfig::default(),
            traffic: TrafficConfig::default(),
            contention: ContentionConfig::default(),
        }
    }

    pub const PRESETS: [&'static str; 7] = [
        "fig2a",
        "fig2b",
        "fig3",
        "fig4",
        "fig5",
        "fig6",
        "utilization",
    ];

    /// Named specs for the figure-class experiments.
    pub fn preset(name: &str) -> Result<Self> {
        let out = PathBuf::from(format!("{name}.csv"));
        let spec = match name {
            "fig2a" => Self {
                densities: FIG2_DENSITIES.to_vec(),
                beamwidths_deg: FIG2_BEAMWIDTHS.to_vec(),
                p_grid: vec![1.0],
                replications: 10_000,
                ..Self::new(ExperimentKind::CollisionProbability, out)
            },
            "fig2b" => Self {
                densities: FIG2_DENSITIES.to_vec(),
                beamwidths_deg: FIG2_BEAMWIDTHS.to_vec(),
                p_grid: p_steps(),
                replications: 1,
                search_replications: 1_000,
                ..Self::new(ExperimentKind::OptimalP, out)
            },
            "fig3" => Self {
                densities: vec![0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0],
                beamwidths_deg: vec![10.0, 30.0, 60.0],
                p_grid: p_steps(),
                replications: 100,
                ..Self::new(ExperimentKind::AlohaVsTdmaThroughput, out)
            },
            "fig4" => Self {
                densities: vec![0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0],
                beamwidths_deg: vec![10.0],
                p_grid: p_steps(),
                replications: 100,
                ..Self::new(ExperimentKind::ThroughputDelayCurve, out)
            },
            "fig5" => {
                let mut s = Self {
                    densities: vec![0.11, 1.0, 10.0],
                    beamwidths_deg: vec![5.0, 30.0, 360.0],
                    replications: 200,
                    ..Self::new(ExperimentKind::CollisionDomains, out)
                };
                s.network.obstacle_density = 0.11;
                s
            }
            "fig6" => Self {
                blockage_probs: vec![0.0, 0.005, 0.01, 0.02, 0.05, 0.1],
                n_devices: vec![20],
                replications: 10_000,
                ..Self::new(ExperimentKind::CnBackoff, out)
            },
            "utilization" => {
                let mut s = Self {
                    payload_sizes: vec![1_000, 10_000],
                    ..Self::new(ExperimentKind::UtilizationTable, out)
                };
                s.contention.timings.paper_rounding = true;
                s
            }
            other => {
                return Err(Error::config(
                    "preset",
                    format!(
                        "unknown preset {other:?}; known: {}",
                        Self::PRESETS.join(", ")
                    ),
                ))
            }
        };
        Ok(spec)
    }

    /// Parse a spec, or the sidecar written next to a dataset.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let value = match value {
            serde_json::Value::Object(mut map) if map.contains_key("spec") => {
                map.remove("spec").expect("checked")
            }
            v => v,
        };
        Ok(serde_json::from_value(value)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn sidecar_path(&self) -> PathBuf {
        self.output_path.with_extension("json")
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::config("replications", "must be >= 1"));
        }
        let kind = self.kind;
        if kind.uses_network() {
            require_grid("densities", &self.densities)?;
            require_grid("beamwidths_deg", &self.beamwidths_deg)?;
            if let Some(d) = self
                .densities
                .iter()
                .find(|d| !(d.is_finite() && **d >= 0.0))
            {
                return Err(Error::config("densities", format!("{d} is not a density")));
            }
            if let Some(b) = self
                .beamwidths_deg
                .iter()
                .find(|b| !(**b > 0.0 && **b <= 360.0))
            {
                return Err(Error::config(
                    "beamwidths_deg",
                    format!("{b} outside (0, 360]"),
                ));
            }
            for &d in &self.densities {
                for &b in &self.beamwidths_deg {
                    self.network.scenario(d, b).resolve()?;
                }
            }
        }
        if kind.uses_p_grid() {
            require_grid("p_grid", &self.p_grid)?;
            if let Some(p) = self.p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::config("p_grid", format!("{p} is not a probability")));
            }
        }
        match kind {
            ExperimentKind::OptimalP
            | ExperimentKind::AlohaVsTdmaThroughput
            | ExperimentKind::ThroughputDelayCurve => {
                if self.search_replications == 0 {
                    return Err(Error::config("search_replications", "must be >= 1"));
                }
                if self.search_slots == 0 {
                    return Err(Error::config("search_slots", "must be >= 1"));
                }
                self.slot.validate()?;
                self.traffic.validate()?;
                if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
                    return Err(Error::config("duration_s", "must be positive"));
                }
            }
            ExperimentKind::CnBackoff => {
                require_grid("blockage_probs", &self.blockage_probs)?;
                require_grid("n_devices", &self.n_devices)?;
                if let Some(q) = self
                    .blockage_probs
                    .iter()
                    .find(|q| !(0.0..=1.0).contains(*q))
                {
                    return Err(Error::config(
                        "blockage_probs",
                        format!("{q} is not a probability"),
                    ));
                }
                if self.n_devices.contains(&0) {
                    return Err(Error::config("n_devices", "must be >= 1"));
                }
                self.contention.backoff.validate()?;
                self.contention.timings.validate()?;
            }
            ExperimentKind::UtilizationTable => {
                require_grid("payload_sizes", &self.payload_sizes)?;
                self.contention.timings.validate()?;
            }
            _ => {}
        }
        Ok(())
    }
}

fn require_grid<T>(field: &'static str, grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        Err(Error::config(field, "grid must not be empty"))
    } else {
        Ok(())
    }
}

/// Histogram and probability rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityRow {
    pub beamwidth_deg: f64,
    pub density: f64,
    /// Collision-domain size, or the activation probability.
    pub size_or_p: f64,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub replications: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalPRow {
    pub beamwidth_deg: f64,
    pub density: f64,
    pub p: f64,
    pub per_link_tput: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub optimal: bool,
    pub replications: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacRow {
    pub protocol: String,
    pub density: f64,
    pub beamwidth_deg: f64,
    /// Empty for TDMA.
    pub p: Option<f64>,
    pub per_link_tput: f64,
    pub net_tput: f64,
    /// Empty when nothing was delivered or traffic was saturated.
    pub mean_delay_s: Option<f64>,
    pub delivered: u64,
    pub collided: u64,
    pub links: usize,
    pub replication: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentionRow {
    pub variant: ProtocolVariant,
    pub n_devices: usize,
    pub blockage_prob: f64,
    pub mean_backoff_us: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_attempts: f64,
    pub unresolved: u64,
    pub replications: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilizationRow {
    pub payload_bytes: u64,
    pub total_delay_us: f64,
    pub utilization: f64,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    code_version: &'a str,
    rows: usize,
    spec: &'a ExperimentSpec,
}

/// Paths written by [`run_experiment`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentOutput {
    pub csv_path: PathBuf,
    pub sidecar_path: PathBuf,
    pub rows: usize,
}

fn grid_seed(spec: &ExperimentSpec, key: &str) -> u64 {
    stream_seed(spec.master_seed, &format!("{}/{key}", spec.kind.name()), 0)
}

fn network_grid(spec: &ExperimentSpec) -> Vec<(f64, f64)> {
    // density-major, matching the row order
    spec.densities
        .iter()
        .flat_map(|&d| spec.beamwidths_deg.iter().map(move |&b| (d, b)))
        .collect()
}

fn collision_rows(spec: &ExperimentSpec) -> Result<Vec<ProbabilityRow>> {
    let points: Vec<(f64, f64, f64)> = network_grid(spec)
        .into_iter()
        .flat_map(|(d, b)| spec.p_grid.iter().map(move |&p| (d, b, p)))
        .collect();
    points
        .par_iter()
        .map(|&(d, b, p)| {
            let seed = grid_seed(spec, &format!("density={d}"));
            let est = estimate_collision_probability(
                &spec.network.scenario(d, b),
                p,
                spec.replications,
                seed,
            )?;
            Ok(ProbabilityRow {
                beamwidth_deg: b,
                density: d,
                size_or_p: p,
                value: est.probability,
                ci_low: est.ci.low,
                ci_high: est.ci.high,
                replications: spec.replications,
                seed,
            })
        })
        .collect()
}

fn domain_rows(spec: &ExperimentSpec) -> Result<Vec<ProbabilityRow>> {
    let per_point: Vec<Vec<ProbabilityRow>> = network_grid(spec)
        .par_iter()
        .map(|&(d, b)| {
            let seed = grid_seed(spec, &format!("density={d}"));
            let report = collision_domain_histogram(
                &spec.network.scenario(d, b),
                spec.replications,
                seed,
                spec.domain_mode,
            )?;
            let total = report.histogram.total();
            Ok(report
                .histogram
                .counts
                .iter()
                .map(|(&size, &count)| {
                    let ci = wilson_interval(count, total, 0.95);
                    ProbabilityRow {
                        beamwidth_deg: b,
                        density: d,
                        size_or_p: size as f64,
                        value: count as f64 / total as f64,
                        ci_low: ci.low,
                        ci_high: ci.high,
                        replications: spec.replications,
                        seed,
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

fn optimal_p_rows(spec: &ExperimentSpec) -> Result<Vec<OptimalPRow>> {
    let per_point: Vec<Vec<OptimalPRow>> = network_grid(spec)
        .par_iter()
        .map(|&(d, b)| {
            let seed = grid_seed(spec, &format!("density={d}"));
            let opt = find_optimal_p(
                &spec.network.scenario(d, b),
                &spec.p_grid,
                spec.search_replications,
                spec.search_slots,
                seed,
            )?;
            Ok(opt
                .curve
                .iter()
                .map(|pt| OptimalPRow {
                    beamwidth_deg: b,
                    density: d,
                    p: pt.p,
                    per_link_tput: pt.per_link_throughput,
                    ci_low: pt.ci.low,
                    ci_high: pt.ci.high,
                    optimal: pt.p == opt.p_star,
                    replications: spec.search_replications,
                    seed,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

fn mac_row(
    protocol: &str,
    d: f64,
    b: f64,
    p: Option<f64>,
    m: &MacMetrics,
    links: usize,
    r: u64,
    seed: u64,
) -> MacRow {
    MacRow {
        protocol: protocol.to_owned(),
        density: d,
        beamwidth_deg: b,
        p,
        per_link_tput: m.per_link_throughput,
        net_tput: m.network_throughput,
        mean_delay_s: m.mean_delay,
        delivered: m.delivered,
        collided: m.collided,
        links,
        replication: r,
        seed,
    }
}

/// ALOHA at the saturated-optimal p next to TDMA, both on the same
/// deployment in every replication.
fn mac_rows(spec: &ExperimentSpec, traffic: TrafficConfig) -> Result<Vec<MacRow>> {
    let slots = spec.slot.slots_in(spec.duration_s);
    let per_point: Vec<Vec<MacRow>> = network_grid(spec)
        .par_iter()
        .map(|&(d, b)| {
            let seed = grid_seed(spec, &format!("density={d}"));
            let scenario = spec.network.scenario(d, b);
            let opt = find_optimal_p(
                &scenario,
                &spec.p_grid,
                spec.search_replications,
                spec.search_slots,
                stream_seed(seed, "search", 0),
            )?;
            let aloha = AlohaConfig {
                transmit_probability: opt.p_star,
            };
            let resolved = scenario.resolve()?;
            let rows: Vec<[MacRow; 2]> = (0..spec.replications)
                .into_par_iter()
                .map(|r| {
                    let rep_seed = replication_seed(seed, r);
                    let deployment = resolved.sample(rep_seed);
                    let map = InterferenceMap::build(&deployment, &resolved.model);
                    let run_seed = stream_seed(rep_seed, "mac", 0);
                    let a = run_slotted_aloha_on_map(
                        &map, &spec.slot, &traffic, &aloha, slots, run_seed,
                    )?;
                    let t = run_tdma_on_map(&map, &spec.slot, &traffic, slots, run_seed)?;
                    let n = map.len();
                    Ok([
                        mac_row("aloha", d, b, Some(opt.p_star), &a, n, r, rep_seed),
                        mac_row("tdma", d, b, None, &t, n, r, rep_seed),
                    ])
                })
                .collect::<Result<_>>()?;
            Ok(rows.into_iter().flatten().collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

fn contention_rows(spec: &ExperimentSpec) -> Result<Vec<ContentionRow>> {
    let mut points = Vec::new();
    for &n in &spec.n_devices {
        for &q in &spec.blockage_probs {
            for v in [
                ProtocolVariant::StandardRtsCts,
                ProtocolVariant::WithCollisionNotification,
            ] {
                points.push((n, q, v));
            }
        }
    }
    points
        .par_iter()
        .map(|&(n, q, v)| {
            let seed = grid_seed(spec, &format!("n={n}/q={q}"));
            let s = run_contention_experiment(n, q, v, spec.replications, &spec.contention, seed)?;
            Ok(ContentionRow {
                variant: v,
                n_devices: n,
                blockage_prob: q,
                mean_backoff_us: s.mean_winner_backoff * 1e6,
                ci_low: s.ci.low * 1e6,
                ci_high: s.ci.high * 1e6,
                mean_attempts: s.mean_winner_attempts,
                unresolved: s.unresolved,
                replications: spec.replications,
                seed,
            })
        })
        .collect()
}

fn utilization_rows(spec: &ExperimentSpec) -> Vec<UtilizationRow> {
    spec.payload_sizes
        .iter()
        .map(|&bytes| {
            let u = channel_utilization(bytes, &spec.contention.timings);
            UtilizationRow {
                payload_bytes: bytes,
                total_delay_us: u.total_delay * 1e6,
                utilization: u.utilization,
            }
        })
        .collect()
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<usize> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(file);
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(rows.len())
}

const PROBABILITY_HEADER: [&str; 8] = [
    "beamwidth_deg",
    "density",
    "size_or_p",
    "value",
    "ci_low",
    "ci_high",
    "replications",
    "seed",
];
const OPTIMAL_P_HEADER: [&str; 9] = [
    "beamwidth_deg",
    "density",
    "p",
    "per_link_tput",
    "ci_low",
    "ci_high",
    "optimal",
    "replications",
    "seed",
];
const MAC_HEADER: [&str; 12] = [
    "protocol",
    "density",
    "beamwidth_deg",
    "p",
    "per_link_tput",
    "net_tput",
    "mean_delay_s",
    "delivered",
    "collided",
    "links",
    "replication",
    "seed",
];
const CONTENTION_HEADER: [&str; 10] = [
    "variant",
    "n_devices",
    "blockage_prob",
    "mean_backoff_us",
    "ci_low",
    "ci_high",
    "mean_attempts",
    "unresolved",
    "replications",
    "seed",
];
const UTILIZATION_HEADER: [&str; 3] = ["payload_bytes", "total_delay_us", "utilization"];

/// Run the whole grid and write `output_path` plus its `.json` sidecar.
/// Output depends only on the spec.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let csv_path = spec.output_path.clone();
    if let Some(parent) = csv_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let rows = match spec.kind {
        ExperimentKind::CollisionProbability => {
            write_rows(&csv_path, &collision_rows(spec)?, &PROBABILITY_HEADER)?
        }
        ExperimentKind::CollisionDomains => {
            write_rows(&csv_path, &domain_rows(spec)?, &PROBABILITY_HEADER)?
        }
        ExperimentKind::OptimalP => {
            write_rows(&csv_path, &optimal_p_rows(spec)?, &OPTIMAL_P_HEADER)?
        }
        ExperimentKind::AlohaVsTdmaThroughput => write_rows(
            &csv_path,
            &mac_rows(spec, TrafficConfig::saturated())?,
            &MAC_HEADER,
        )?,
        ExperimentKind::ThroughputDelayCurve => {
            write_rows(&csv_path, &mac_rows(spec, spec.traffic)?, &MAC_HEADER)?
        }
        ExperimentKind::CnBackoff => {
            write_rows(&csv_path, &contention_rows(spec)?, &CONTENTION_HEADER)?
        }
        ExperimentKind::UtilizationTable => {
            write_rows(&csv_path, &utilization_rows(spec), &UTILIZATION_HEADER)?
        }
    };
    let sidecar_path = spec.sidecar_path();
    let sidecar = Sidecar {
        code_version: CODE_VERSION,
        rows,
        spec,
    };
    let mut text = serde_json::to_string_pretty(&sidecar)?;
    text.push('\n');
    fs::write(&sidecar_path, text).map_err(|e| Error::io(&sidecar_path, e))?;
    Ok(ExperimentOutput {
        csv_path,
        sidecar_path,
        rows,
    })
}

/// A CSV table kept as text, for grouping and summarizing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Dataset {
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.iter().map(str::to_owned).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_owned).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { headers, rows })
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::SchemaMismatch(format!("no column named {name:?}")))
    }

    /// Parse a column as numbers; empty cells are skipped.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.column_index(name)?;
        self.rows
            .iter()
            .filter(|row| !row[i].is_empty())
            .map(|row| parse_cell(name, &row[i]))
            .collect()
    }
}

fn parse_cell(column: &str, cell: &str) -> Result<f64> {
    cell.parse()
        .map_err(|_| Error::SchemaMismatch(format!("column {column:?}: {cell:?} is not a number")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    /// `(column, value)` for each grouping column.
    pub keys: Vec<(String, String)>,
    pub mean: f64,
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: u64,
}

/// Group rows by the `group_by` columns and summarize `value` with a 95%
/// normal interval. Groups appear in order of first occurrence; rows with
/// an empty `value` cell are left out.
pub fn summarize(dataset: &Dataset, group_by: &[&str], value: &str) -> Result<Vec<SummaryRecord>> {
    let key_idx: Vec<usize> = group_by
        .iter()
        .map(|c| dataset.column_index(c))
        .collect::<Result<_>>()?;
    let vi = dataset.column_index(value)?;
    let mut order: Vec<Vec<String>> = Vec::new();
    let mut groups: HashMap<Vec<String>, RunningStats> = HashMap::new();
    for row in &dataset.rows {
        if row[vi].is_empty() {
            continue;
        }
        let x = parse_cell(value, &row[vi])?;
        let key: Vec<String> = key_idx.iter().map(|&i| row[i].clone()).collect();
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                RunningStats::new()
            })
            .push(x);
    }
    Ok(order
        .into_iter()
        .map(|key| {
            let s = groups[&key];
            let ci = s.normal_ci(0.95);
            SummaryRecord {
                keys: group_by.iter().map(|c| c.to_string()).zip(key).collect(),
                mean: s.mean(),
                std: s.std_dev(),
                ci_low: ci.low,
                ci_high: ci.high,
                n: s.count(),
            }
        })
        .collect())
}

/// Write summary records as CSV: the grouping columns, then
/// `mean,std,ci_low,ci_high,n`.
pub fn write_summary_csv<W: std::io::Write>(
    records: &[SummaryRecord],
    group_by: &[&str],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = group_by.to_vec();
    header.extend(["mean", "std", "ci_low", "ci_high", "n"]);
    w.write_record(&header)?;
    for rec in records {
        let mut fields: Vec<String> = rec.keys.iter().map(|(_, v)| v.clone()).collect();
        fields.extend([
            rec.mean.to_string(),
            rec.std.to_string(),
            rec.ci_low.to_string(),
            rec.ci_high.to_string(),
            rec.n.to_string(),
        ]);
        w.write_record(&fields)?;
    }
    w.flush()
        .map_err(|e| Error::io(Path::new("<summary>"), e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dataset(csv: &str) -> Dataset {
        Dataset::from_reader(csv.as_bytes()).unwrap()
    }

    #[test]
    fn identical_rows_summarize_to_zero_width() {
        let mut text = String::from("g,v\n");
        for _ in 0..100 {
            text.push_str("a,2.5\n");
        }
        let s = summarize(&dataset(&text), &["g"], "v").unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].mean, 2.5);
        assert_eq!(s[0].std, 0.0);
        assert_eq!(s[0].ci_high - s[0].ci_low, 0.0);
        assert_eq!(s[0].n, 100);
    }

    #[test]
    fn two_groups_keep_all_rows() {
        let s = summarize(&dataset("g,v\na,1\nb,2\na,3\nb,4\nb,6\n"), &["g"], "v").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].keys, vec![("g".to_string(), "a".to_string())]);
        assert_eq!(s.iter().map(|r| r.n).sum::<u64>(), 5);
        assert_abs_diff_eq!(s[1].mean, 4.0);
    }

    #[test]
    fn missing_column_is_schema_mismatch() {
        let d = dataset("g,v\na,1\n");
        assert!(matches!(
            summarize(&d, &["h"], "v"),
            Err(Error::SchemaMismatch(_))
        ));
        let d = dataset("g,v\na,x\n");
        assert!(matches!(
            summarize(&d, &["g"], "v"),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn validation_names_the_field() {
        let mut spec = ExperimentSpec::preset("fig2a").unwrap();
        spec.densities.clear();
        match spec.validate() {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "densities"),
            other => panic!("unexpected {other:?}"),
        }
        let mut spec = ExperimentSpec::preset("fig6").unwrap();
        spec.replications = 0;
        match spec.validate() {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "replications"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn presets_are_valid_and_round_trip() {
        for name in ExperimentSpec::PRESETS {
            let spec = ExperimentSpec::preset(name).unwrap();
            spec.validate().unwrap();
            let back = ExperimentSpec::from_json(&spec.to_json().unwrap()).unwrap();
            assert_eq!(back, spec);
        }
        assert!(ExperimentSpec::preset("fig9").is_err());
    }

    #[test]
    fn fig5_uses_its_own_obstacle_density() {
        let spec = ExperimentSpec::preset("fig5").unwrap();
        assert_eq!(spec.network.obstacle_density, 0.11);
        assert_eq!(
            ExperimentSpec::preset("fig2a")
                .unwrap()
                .network
                .obstacle_density,
            0.25
        );
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"kind":"cn_backoff","replications":1,"master_seed":0,"output_path":"x.csv","blockage_probz":[0.1]}"#;
        assert!(ExperimentSpec::from_json(text).is_err());
    }
}
