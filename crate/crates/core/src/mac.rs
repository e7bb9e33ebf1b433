//! Slotted MAC engines: slotted ALOHA and round-robin TDMA over a fixed
//! deployment, with CBR or saturated traffic and infinite queues.
//!
//! A packet that arrives at the start of slot `t` and is decoded in slot
//! `t'` has delay `(t' + 1 - t)` slots: the reception completes at the end
//! of the slot it was sent in, so the minimum delay is one slot.

use std::collections::VecDeque;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Deployment;
use crate::radio::{InterferenceMap, RadioModel};
use crate::scenario::Scenario;
use crate::seed::{replication_seed, rng_from_seed, SimRng};
use crate::stats::{Interval, RunningStats};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotConfig {
    pub slot_duration: f64,
    /// One packet fills exactly one slot.
    pub packet_size_bits: f64,
}

impl Default for SlotConfig {
    fn default() -> Self {
        Self {
            slot_duration: 25e-6,
            packet_size_bits: 80_000.0,
        }
    }
}

impl SlotConfig {
    pub fn link_capacity_bps(&self) -> f64 {
        self.packet_size_bits / self.slot_duration
    }

    pub fn slots_in(&self, duration_s: f64) -> u64 {
        (duration_s / self.slot_duration).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.slot_duration.is_finite() && self.slot_duration > 0.0) {
            return Err(Error::config("slot_duration", "must be positive"));
        }
        if !(self.packet_size_bits.is_finite() && self.packet_size_bits > 0.0) {
            return Err(Error::config("packet_size_bits", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficConfig {
    /// Constant bit rate per transmitter, bits/s.
    pub cbr_rate: f64,
    /// Every queue is permanently backlogged; `cbr_rate` is ignored.
    #[serde(default)]
    pub saturated: bool,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            cbr_rate: 300e6,
            saturated: false,
        }
    }
}

impl TrafficConfig {
    pub fn saturated() -> Self {
        Self {
            cbr_rate: 0.0,
            saturated: true,
        }
    }

    pub fn packets_per_slot(&self, slot: &SlotConfig) -> f64 {
        self.cbr_rate * slot.slot_duration / slot.packet_size_bits
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cbr_rate.is_finite() && self.cbr_rate >= 0.0) {
            return Err(Error::config("cbr_rate", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlohaConfig {
    pub transmit_probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LinkCounters {
    pub arrivals: u64,
    pub delivered: u64,
    /// Still waiting at the end of the run.
    pub queued: u64,
    pub attempts: u64,
    /// Failed attempts of a covered link (interference).
    pub collided: u64,
    /// Failed attempts of a link that cannot close on its own.
    pub blocked: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacMetrics {
    /// Packets per slot, averaged over links.
    pub per_link_throughput: f64,
    /// Packets per slot, summed over links.
    pub network_throughput: f64,
    /// Seconds, over delivered packets only; `None` when nothing was
    /// delivered or the traffic was saturated.
    pub mean_delay: Option<f64>,
    pub delivered: u64,
    pub collided: u64,
    pub blocked: u64,
    /// Packets left in queues at the end of the run.
    pub backlog: u64,
    pub slots: u64,
    pub per_link: Vec<LinkCounters>,
}

struct LinkQueue {
    credit: f64,
    waiting: VecDeque<u64>,
}

struct Engine {
    rate: f64,
    saturated: bool,
    queues: Vec<LinkQueue>,
    counters: Vec<LinkCounters>,
    delay_slots: u128,
}

impl Engine {
    fn new(links: usize, traffic: &TrafficConfig, slot: &SlotConfig, rng: &mut SimRng) -> Self {
        // seeded phase per link so CBR sources are not synchronized
        let queues = (0..links)
            .map(|_| LinkQueue {
                credit: rng.random::<f64>(),
                waiting: VecDeque::new(),
            })
            .collect();
        Self {
            rate: traffic.packets_per_slot(slot),
            saturated: traffic.saturated,
            queues,
            counters: vec![LinkCounters::default(); links],
            delay_slots: 0,
        }
    }

    fn arrivals(&mut self, t: u64) {
        if self.saturated {
            return;
        }
        for (q, c) in self.queues.iter_mut().zip(&mut self.counters) {
            q.credit += self.rate;
            while q.credit >= 1.0 {
                q.credit -= 1.0;
                q.waiting.push_back(t);
                c.arrivals += 1;
            }
        }
    }

    fn backlogged(&self, link: usize) -> bool {
        self.saturated || !self.queues[link].waiting.is_empty()
    }

    fn success(&mut self, link: usize, t: u64) {
        let c = &mut self.counters[link];
        c.attempts += 1;
        c.delivered += 1;
        if !self.saturated {
            let arrived = self.queues[link].waiting.pop_front().expect("backlogged");
            self.delay_slots += u128::from(t + 1 - arrived);
        }
    }

    fn failure(&mut self, link: usize, covered: bool) {
        let c = &mut self.counters[link];
        c.attempts += 1;
        if covered {
            c.collided += 1;
        } else {
            c.blocked += 1;
        }
    }

    fn finish(mut self, slots: u64, slot: &SlotConfig) -> MacMetrics {
        for (q, c) in self.queues.iter().zip(&mut self.counters) {
            c.queued = q.waiting.len() as u64;
        }
        let n = self.counters.len();
        let delivered: u64 = self.counters.iter().map(|c| c.delivered).sum();
        let network_throughput = if slots == 0 {
            0.0
        } else {
            delivered as f64 / slots as f64
        };
        let mean_delay = (!self.saturated && delivered > 0)
            .then(|| self.delay_slots as f64 / delivered as f64 * slot.slot_duration);
        MacMetrics {
            per_link_throughput: if n == 0 {
                0.0
            } else {
                network_throughput / n as f64
            },
            network_throughput,
            mean_delay,
            delivered,
            collided: self.counters.iter().map(|c| c.collided).sum(),
            blocked: self.counters.iter().map(|c| c.blocked).sum(),
            backlog: self.counters.iter().map(|c| c.queued).sum(),
            slots,
            per_link: self.counters,
        }
    }
}

fn check_run(duration_s: f64, slot: &SlotConfig, traffic: &TrafficConfig) -> Result<u64> {
    slot.validate()?;
    traffic.validate()?;
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::config("duration_s", "must be positive"));
    }
    Ok(slot.slots_in(duration_s))
}

/// Slotted ALOHA on a prebuilt interference map, for `slots` slots.
pub fn run_slotted_aloha_on_map(
    map: &InterferenceMap,
    slot: &SlotConfig,
    traffic: &TrafficConfig,
    aloha: &AlohaConfig,
    slots: u64,
    seed: u64,
) -> Result<MacMetrics> {
    let p = aloha.transmit_probability;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::config(
            "transmit_probability",
            format!("must lie in [0, 1], got {p}"),
        ));
    }
    let n = map.len();
    let mut rng = rng_from_seed(seed);
    let mut engine = Engine::new(n, traffic, slot, &mut rng);
    let mut active = vec![false; n];
    let mut transmitters = Vec::with_capacity(n);
    for t in 0..slots {
        engine.arrivals(t);
        transmitters.clear();
        for (i, a) in active.iter_mut().enumerate() {
            // one draw per link per slot keeps streams aligned across p
            let u: f64 = rng.random();
            *a = u < p && engine.backlogged(i);
            if *a {
                transmitters.push(i);
            }
        }
        for &i in &transmitters {
            if map.decodes(i, &active) {
                engine.success(i, t);
            } else {
                engine.failure(i, map.covered(i));
            }
        }
    }
    Ok(engine.finish(slots, slot))
}

/// Slotted ALOHA: each backlogged link sends its head-of-line packet with
/// probability `p`; a packet is delivered iff the receiver's SINR, given
/// every concurrent transmitter, meets the decode threshold. Failed packets
/// stay at the head of the queue.
pub fn run_slotted_aloha(
    deployment: &Deployment,
    model: &RadioModel,
    slot: &SlotConfig,
    traffic: &TrafficConfig,
    aloha: &AlohaConfig,
    duration_s: f64,
    seed: u64,
) -> Result<MacMetrics> {
    let slots = check_run(duration_s, slot, traffic)?;
    let map = InterferenceMap::build(deployment, model);
    run_slotted_aloha_on_map(&map, slot, traffic, aloha, slots, seed)
}

/// Round-robin TDMA on a prebuilt map: slot `t` belongs to link `t mod L`.
pub fn run_tdma_on_map(
    map: &InterferenceMap,
    slot: &SlotConfig,
    traffic: &TrafficConfig,
    slots: u64,
    seed: u64,
) -> Result<MacMetrics> {
    let n = map.len();
    let mut rng = rng_from_seed(seed);
    let mut engine = Engine::new(n, traffic, slot, &mut rng);
    if n > 0 {
        for t in 0..slots {
            engine.arrivals(t);
            let owner = (t % n as u64) as usize;
            if !engine.backlogged(owner) {
                continue;
            }
            // alone on the channel: only blockage and range matter
            if map.covered(owner) {
                engine.success(owner, t);
            } else {
                engine.failure(owner, false);
            }
        }
    }
    Ok(engine.finish(slots, slot))
}

/// Round-robin TDMA: one link per slot, so no multiuser interference and no
/// collisions.
pub fn run_tdma(
    deployment: &Deployment,
    model: &RadioModel,
    slot: &SlotConfig,
    traffic: &TrafficConfig,
    duration_s: f64,
    seed: u64,
) -> Result<MacMetrics> {
    let slots = check_run(duration_s, slot, traffic)?;
    let map = InterferenceMap::build(deployment, model);
    run_tdma_on_map(&map, slot, traffic, slots, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputPoint {
    pub p: f64,
    /// Mean over replications of the per-link saturated throughput.
    pub per_link_throughput: f64,
    pub ci: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalP {
    pub p_star: f64,
    pub max_throughput: f64,
    pub curve: Vec<ThroughputPoint>,
}

/// Grid search for the transmit probability that maximizes the mean
/// per-link throughput of saturated slotted ALOHA. Every grid value sees the
/// same deployments and the same uniform draws, so the comparison between
/// neighbouring values is not swamped by sampling noise. Ties go to the
/// larger `p`.
pub fn find_optimal_p(
    scenario: &Scenario,
    p_grid: &[f64],
    replications: u64,
    slots_per_replication: u64,
    seed: u64,
) -> Result<OptimalP> {
    check_search(p_grid, replications, slots_per_replication)?;
    let resolved = scenario.resolve()?;
    let per_rep: Vec<Option<Vec<f64>>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let rep_seed = replication_seed(seed, r);
            let d = resolved.sample(rep_seed);
            if d.is_empty() {
                return None;
            }
            let map = InterferenceMap::build(&d, &resolved.model);
            Some(saturated_curve(
                &map,
                p_grid,
                slots_per_replication,
                rep_seed,
            ))
        })
        .collect();
    Ok(pick_optimal(p_grid, &per_rep))
}

/// [`find_optimal_p`] on one fixed deployment: replications differ only in
/// the activation draws.
pub fn find_optimal_p_on_map(
    map: &InterferenceMap,
    p_grid: &[f64],
    replications: u64,
    slots_per_replication: u64,
    seed: u64,
) -> Result<OptimalP> {
    check_search(p_grid, replications, slots_per_replication)?;
    let per_rep: Vec<Option<Vec<f64>>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            (!map.is_empty()).then(|| {
                saturated_curve(
                    map,
                    p_grid,
                    slots_per_replication,
                    replication_seed(seed, r),
                )
            })
        })
        .collect();
    Ok(pick_optimal(p_grid, &per_rep))
}

fn check_search(p_grid: &[f64], replications: u64, slots_per_replication: u64) -> Result<()> {
    if p_grid.is_empty() {
        return Err(Error::config("p_grid", "must not be empty"));
    }
    if let Some(bad) = p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::config(
            "p_grid",
            format!("{bad} is not a probability"),
        ));
    }
    if replications == 0 {
        return Err(Error::config("replications", "must be >= 1"));
    }
    if slots_per_replication == 0 {
        return Err(Error::config("slots_per_replication", "must be >= 1"));
    }
    Ok(())
}

fn saturated_curve(map: &InterferenceMap, p_grid: &[f64], slots: u64, seed: u64) -> Vec<f64> {
    let slot = SlotConfig::default();
    let traffic = TrafficConfig::saturated();
    p_grid
        .iter()
        .map(|&p| {
            let aloha = AlohaConfig {
                transmit_probability: p,
            };
            run_slotted_aloha_on_map(map, &slot, &traffic, &aloha, slots, seed)
                .expect("validated inputs")
                .per_link_throughput
        })
        .collect()
}

fn pick_optimal(p_grid: &[f64], per_rep: &[Option<Vec<f64>>]) -> OptimalP {
    let curve: Vec<ThroughputPoint> = p_grid
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let s: RunningStats = per_rep.iter().flatten().map(|t| t[k]).collect();
            let (mean, ci) = if s.count() == 0 {
                (
                    0.0,
                    Interval {
                        low: 0.0,
                        high: 0.0,
                    },
                )
            } else {
                (s.mean(), s.normal_ci(0.95))
            };
            ThroughputPoint {
                p,
                per_link_throughput: mean,
                ci,
            }
        })
        .collect();

    let best = curve
        .iter()
        .max_by(|a, b| {
            a.per_link_throughput
                .total_cmp(&b.per_link_throughput)
                .then(a.p.total_cmp(&b.p))
        })
        .expect("non-empty grid");
    OptimalP {
        p_star: best.p,
        max_throughput: best.per_link_throughput,
        curve,
    }
}
