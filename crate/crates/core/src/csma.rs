//! CSMA/CA control-plane arithmetic and the collision-notification (CN)
//! contention experiment.
//!
//! The contention model follows a single receiver that `n` saturated
//! devices try to reach. Every device counts down a backoff drawn uniformly
//! from `[0, CW)`; the devices whose counters expire together send an RTS,
//! each RTS is lost to blockage independently with probability `q`, and the
//! receiver reacts to what actually arrives:
//!
//! | arrived RTS | receiver     | standard RTS/CTS       | with CN                        |
//! |-------------|--------------|------------------------|--------------------------------|
//! | exactly 1   | CTS          | winner                 | winner                         |
//! | 2 or more   | collision    | timeout, CW doubles    | CN, CW doubles                 |
//! | blocked     | silence      | timeout, CW doubles    | timeout, retry at unchanged CW |
//!
//! Devices that did not transmit keep their (frozen) counters.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{replication_seed, rng_from_seed, SimRng};
use crate::stats::{Interval, RunningStats};

/// Data rate that reproduces the printed 13.6 us data time for a 10 kB
/// payload together with the rounded 2.2 us header.
pub const ROUNDED_DATA_RATE: f64 = 7.0e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsmaTimings {
    pub t_sifs: f64,
    pub t_difs: f64,
    /// bits/s
    pub control_rate: f64,
    /// bits/s
    pub data_rate: f64,
    pub rts_bytes: u32,
    pub cts_bytes: u32,
    pub header_bytes: u32,
    /// Use the rounded control-frame durations (5.5 us RTS/CTS, 2.2 us
    /// header) and the matching payload rate instead of exact arithmetic.
    #[serde(default)]
    pub paper_rounding: bool,
}

impl Default for CsmaTimings {
    fn default() -> Self {
        Self {
            t_sifs: 2.5e-6,
            t_difs: 6.5e-6,
            control_rate: 27.7e6,
            data_rate: 6.7e9,
            rts_bytes: 20,
            cts_bytes: 20,
            header_bytes: 8,
            paper_rounding: false,
        }
    }
}

impl CsmaTimings {
    pub fn rounded() -> Self {
        Self {
            paper_rounding: true,
            ..Self::default()
        }
    }

    pub fn t_rts(&self) -> f64 {
        if self.paper_rounding {
            5.5e-6
        } else {
            8.0 * f64::from(self.rts_bytes) / self.control_rate
        }
    }

    pub fn t_cts(&self) -> f64 {
        if self.paper_rounding {
            5.5e-6
        } else {
            8.0 * f64::from(self.cts_bytes) / self.control_rate
        }
    }

    pub fn t_header(&self) -> f64 {
        if self.paper_rounding {
            2.2e-6
        } else {
            8.0 * f64::from(self.header_bytes) / self.control_rate
        }
    }

    pub fn t_payload(&self, payload_bytes: u64) -> f64 {
        let rate = if self.paper_rounding {
            ROUNDED_DATA_RATE
        } else {
            self.data_rate
        };
        8.0 * payload_bytes as f64 / rate
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("t_sifs", self.t_sifs),
            ("t_difs", self.t_difs),
            ("control_rate", self.control_rate),
            ("data_rate", self.data_rate),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field, format!("must be positive, got {v}")));
            }
        }
        if self.rts_bytes == 0 || self.cts_bytes == 0 || self.header_bytes == 0 {
            return Err(Error::config("rts_bytes", "frame sizes must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Utilization {
    /// `2 SIFS + RTS + CTS + DIFS + header + payload`, seconds.
    pub total_delay: f64,
    /// `header + payload`, seconds.
    pub data_time: f64,
    pub utilization: f64,
}

/// Share of one collision-free RTS/CTS/DATA exchange spent on the data
/// frame.
pub fn channel_utilization(payload_bytes: u64, timings: &CsmaTimings) -> Utilization {
    let data_time = timings.t_header() + timings.t_payload(payload_bytes);
    let total_delay =
        2.0 * timings.t_sifs + timings.t_rts() + timings.t_cts() + timings.t_difs + data_time;
    Utilization {
        total_delay,
        data_time,
        utilization: data_time / total_delay,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Rts,
    Cts,
    Cn,
    Data,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReceptionOutcome {
    Silence,
    Decodable(MessageKind),
    Collision,
}

/// Energy-detector receiver: what matters is whether anything was heard
/// and whether one signal stands out enough to be decoded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceptionModel {
    pub noise_mw: f64,
    pub decode_snr_db: f64,
    /// Total received energy below `noise * 10^(x/10)` reads as silence.
    pub detection_threshold_db: f64,
}

impl Default for ReceptionModel {
    fn default() -> Self {
        let ch = crate::radio::ChannelParams::default();
        Self {
            noise_mw: ch.noise_mw(),
            decode_snr_db: ch.decode_snr_db,
            detection_threshold_db: ch.decode_snr_db,
        }
    }
}

impl ReceptionModel {
    pub fn detection_threshold_mw(&self) -> f64 {
        self.noise_mw * 10f64.powf(self.detection_threshold_db / 10.0)
    }
}

/// Classify one observation window from the received `(mW, kind)` pairs.
pub fn classify_reception(
    received: &[(f64, MessageKind)],
    model: &ReceptionModel,
) -> ReceptionOutcome {
    // sorted so the sum, and hence the verdict, ignores input order
    let mut powers: Vec<f64> = received.iter().map(|&(p, _)| p).collect();
    powers.sort_by(f64::total_cmp);
    let total: f64 = powers.iter().sum();
    if total < model.detection_threshold_mw() {
        return ReceptionOutcome::Silence;
    }
    let threshold = 10f64.powf(model.decode_snr_db / 10.0);
    let mut decodable = received
        .iter()
        .filter(|&&(p, _)| p > 0.0 && p / (model.noise_mw + (total - p).max(0.0)) >= threshold);
    match (decodable.next(), decodable.next()) {
        (Some(&(_, kind)), None) => ReceptionOutcome::Decodable(kind),
        _ => ReceptionOutcome::Collision,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolVariant {
    StandardRtsCts,
    WithCollisionNotification,
}

impl ProtocolVariant {
    pub fn label(&self) -> &'static str {
        match self {
            ProtocolVariant::StandardRtsCts => "standard",
            ProtocolVariant::WithCollisionNotification => "cn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackoffConfig {
    /// Slots; a power of two.
    pub cw_min: u32,
    /// Slots; a power of two.
    pub cw_max: u32,
    pub backoff_slot: f64,
    /// Time a device waits for CTS or CN before declaring a timeout.
    pub rts_timeout: f64,
}

impl Default for BackoffConfig {
    fn default() -> Self {
        Self {
            cw_min: 16,
            cw_max: 1024,
            backoff_slot: 5e-6,
            rts_timeout: 15e-6,
        }
    }
}

impl BackoffConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.cw_min.is_power_of_two() {
            return Err(Error::config("cw_min", "must be a power of two"));
        }
        if !self.cw_max.is_power_of_two() || self.cw_max < self.cw_min {
            return Err(Error::config("cw_max", "must be a power of two >= cw_min"));
        }
        if !(self.backoff_slot.is_finite() && self.backoff_slot > 0.0) {
            return Err(Error::config("backoff_slot", "must be positive"));
        }
        if !(self.rts_timeout.is_finite() && self.rts_timeout >= 0.0) {
            return Err(Error::config("rts_timeout", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContentionConfig {
    pub backoff: BackoffConfig,
    pub timings: CsmaTimings,
    /// Rounds after which a replication is abandoned without a winner.
    pub max_rounds: u64,
}

impl Default for ContentionConfig {
    fn default() -> Self {
        Self {
            backoff: BackoffConfig::default(),
            timings: CsmaTimings::default(),
            max_rounds: 1_000_000,
        }
    }
}

/// What each transmitting device observed after its RTS, tallied over all
/// rounds of all replications.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioCounts {
    pub cts: u64,
    pub cn: u64,
    pub timeout: u64,
    pub rts_sent: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentionStats {
    pub variant: ProtocolVariant,
    pub n_devices: usize,
    pub blockage_prob: f64,
    /// Seconds of backoff counted down by the device that finally got CTS.
    pub mean_winner_backoff: f64,
    /// 95% normal interval on the mean.
    pub ci: Interval,
    pub std_winner_backoff: f64,
    /// RTS attempts of the winner -> number of replications.
    pub attempts_histogram: BTreeMap<u32, u64>,
    pub mean_winner_attempts: f64,
    /// Timeouts the winner spent searching for another spatial channel,
    /// seconds (CN variant only; not part of the backoff).
    pub mean_winner_search_time: f64,
    pub scenarios: ScenarioCounts,
    pub resolved: u64,
    pub unresolved: u64,
    /// Largest contention window any device reached.
    pub max_cw: u32,
    pub replications: u64,
    pub seed: u64,
}

struct Outcome {
    max_cw: u32,
    backoff_slots: u64,
    attempts: u32,
    timeouts: u32,
    scenarios: ScenarioCounts,
}

struct Device {
    cw: u32,
    counter: u32,
    backoff_slots: u64,
    attempts: u32,
    timeouts: u32,
}

fn contend(
    n: usize,
    q: f64,
    variant: ProtocolVariant,
    cfg: &ContentionConfig,
    receiver: &ReceptionModel,
    rts_power_mw: f64,
    rng: &mut SimRng,
) -> Option<Outcome> {
    let b = &cfg.backoff;
    let mut devices: Vec<Device> = (0..n)
        .map(|_| {
            let counter = rng.random_range(0..b.cw_min);
            Device {
                cw: b.cw_min,
                counter,
                backoff_slots: u64::from(counter),
                attempts: 0,
                timeouts: 0,
            }
        })
        .collect();
    let mut scenarios = ScenarioCounts::default();
    let mut max_cw = b.cw_min;
    let mut senders = Vec::with_capacity(n);
    let mut arrived = Vec::with_capacity(n);

    for _ in 0..cfg.max_rounds {
        let elapsed = devices.iter().map(|d| d.counter).min().expect("n >= 1");
        senders.clear();
        for (i, d) in devices.iter_mut().enumerate() {
            d.counter -= elapsed;
            if d.counter == 0 {
                senders.push(i);
            }
        }
        arrived.clear();
        let mut blocked = Vec::new();
        for &i in &senders {
            devices[i].attempts += 1;
            let u: f64 = rng.random();
            if u < q {
                blocked.push(i);
            } else {
                arrived.push(i);
            }
        }
        scenarios.rts_sent += senders.len() as u64;

        let signals: Vec<(f64, MessageKind)> = arrived
            .iter()
            .map(|_| (rts_power_mw, MessageKind::Rts))
            .collect();
        let heard = classify_reception(&signals, receiver);
        let mut redraw = |d: &mut Device, rng: &mut SimRng| {
            d.cw = (d.cw.saturating_mul(2)).min(b.cw_max);
            max_cw = max_cw.max(d.cw);
            d.counter = rng.random_range(0..d.cw);
            d.backoff_slots += u64::from(d.counter);
        };

        match heard {
            ReceptionOutcome::Decodable(_) => {
                let w = arrived[0];
                scenarios.cts += 1;
                scenarios.timeout += blocked.len() as u64;
                let d = &devices[w];
                return Some(Outcome {
                    max_cw,
                    backoff_slots: d.backoff_slots,
                    attempts: d.attempts,
                    timeouts: d.timeouts,
                    scenarios,
                });
            }
            ReceptionOutcome::Collision => {
                for &i in &arrived {
                    match variant {
                        ProtocolVariant::WithCollisionNotification => scenarios.cn += 1,
                        ProtocolVariant::StandardRtsCts => scenarios.timeout += 1,
                    }
                    redraw(&mut devices[i], rng);
                }
            }
            ReceptionOutcome::Silence => {
                debug_assert!(arrived.is_empty() || rts_power_mw == 0.0);
                for &i in &arrived {
                    scenarios.timeout += 1;
                    redraw(&mut devices[i], rng);
                }
            }
        }
        for &i in &blocked {
            scenarios.timeout += 1;
            let d = &mut devices[i];
            d.timeouts += 1;
            match variant {
                // another spatial channel, same window, no backoff
                ProtocolVariant::WithCollisionNotification => d.counter = 0,
                ProtocolVariant::StandardRtsCts => redraw(d, rng),
            }
        }
    }
    None
}

/// Monte-Carlo contention among `n_devices` for one receiver. Replication
/// `r` draws from the same stream for both variants, so with `q = 0` the
/// two produce identical traces.
pub fn run_contention_experiment(
    n_devices: usize,
    blockage_prob: f64,
    variant: ProtocolVariant,
    replications: u64,
    cfg: &ContentionConfig,
    seed: u64,
) -> Result<ContentionStats> {
    if n_devices == 0 {
        return Err(Error::config("n_devices", "must be >= 1"));
    }
    if !(0.0..=1.0).contains(&blockage_prob) {
        return Err(Error::config(
            "blockage_prob",
            format!("must lie in [0, 1], got {blockage_prob}"),
        ));
    }
    if replications == 0 {
        return Err(Error::config("replications", "must be >= 1"));
    }
    cfg.backoff.validate()?;
    cfg.timings.validate()?;

    let receiver = ReceptionModel::default();
    // an unobstructed RTS arrives 20 dB above the noise floor
    let rts_power_mw = receiver.noise_mw * 100.0;
    let outcomes: Vec<Option<Outcome>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(replication_seed(seed, r));
            contend(
                n_devices,
                blockage_prob,
                variant,
                cfg,
                &receiver,
                rts_power_mw,
                &mut rng,
            )
        })
        .collect();

    let slot = cfg.backoff.backoff_slot;
    let mut backoff = RunningStats::new();
    let mut attempts = RunningStats::new();
    let mut search = RunningStats::new();
    let mut histogram = BTreeMap::new();
    let mut scenarios = ScenarioCounts::default();
    let mut unresolved = 0;
    let mut max_cw = 0;
    for o in &outcomes {
        let Some(o) = o else {
            unresolved += 1;
            continue;
        };
        max_cw = max_cw.max(o.max_cw);
        backoff.push(o.backoff_slots as f64 * slot);
        attempts.push(f64::from(o.attempts));
        search.push(f64::from(o.timeouts) * cfg.backoff.rts_timeout);
        *histogram.entry(o.attempts).or_insert(0) += 1;
        scenarios.cts += o.scenarios.cts;
        scenarios.cn += o.scenarios.cn;
        scenarios.timeout += o.scenarios.timeout;
        scenarios.rts_sent += o.scenarios.rts_sent;
    }
    let resolved = backoff.count();
    let ci = if resolved == 0 {
        Interval {
            low: f64::NAN,
            high: f64::NAN,
        }
    } else {
        backoff.normal_ci(0.95)
    };
    Ok(ContentionStats {
        variant,
        n_devices,
        blockage_prob,
        mean_winner_backoff: backoff.mean(),
        ci,
        std_winner_backoff: backoff.std_dev(),
        attempts_histogram: histogram,
        mean_winner_attempts: attempts.mean(),
        mean_winner_search_time: search.mean(),
        scenarios,
        resolved,
        unresolved,
        max_cw,
        replications,
        seed,
    })
}
