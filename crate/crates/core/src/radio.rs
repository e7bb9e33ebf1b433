//! Sectored-antenna link budget: gains, path loss, received power, SNR and
//! SINR.
//!
//! All powers are in dBm at the API surface and converted to linear mW
//! only where interference has to be summed.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Arena, Deployment, DirectedLink, Obstacle, Point2D};

/// Thermal noise floor, dBm, for a bandwidth in Hz and a receiver noise
/// figure in dB.
pub fn thermal_noise_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    -174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Wrap an angle into `[-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    a - TAU * (a / TAU).round()
}

/// Ideal sector antenna: constant gain inside the main lobe, constant
/// sidelobe gain outside, total radiated power equal to an isotropic
/// antenna's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaPattern {
    beamwidth: f64,
    sidelobe_gain: f64,
    mainlobe_gain: f64,
}

impl AntennaPattern {
    pub fn new(beamwidth: f64, sidelobe_gain: f64) -> Result<Self> {
        if !(beamwidth > 0.0 && beamwidth <= TAU) {
            return Err(Error::config(
                "beamwidth",
                format!("must lie in (0, 2pi], got {beamwidth}"),
            ));
        }
        if !(0.0..=1.0).contains(&sidelobe_gain) {
            return Err(Error::config(
                "sidelobe_gain",
                format!("must lie in [0, 1], got {sidelobe_gain}"),
            ));
        }
        let mainlobe_gain = (TAU - sidelobe_gain * (TAU - beamwidth)) / beamwidth;
        Ok(Self {
            beamwidth,
            sidelobe_gain,
            mainlobe_gain,
        })
    }

    pub fn omni() -> Self {
        Self::new(TAU, 0.0).expect("valid omni pattern")
    }

    pub fn from_degrees(beamwidth_deg: f64, sidelobe_gain: f64) -> Result<Self> {
        Self::new(beamwidth_deg.to_radians(), sidelobe_gain)
    }

    pub fn beamwidth(&self) -> f64 {
        self.beamwidth
    }

    pub fn sidelobe_gain(&self) -> f64 {
        self.sidelobe_gain
    }

    pub fn mainlobe_gain(&self) -> f64 {
        self.mainlobe_gain
    }
}

/// Linear gain at an angle off boresight.
pub fn antenna_gain(pattern: &AntennaPattern, off_boresight: f64) -> f64 {
    if normalize_angle(off_boresight).abs() <= 0.5 * pattern.beamwidth {
        pattern.mainlobe_gain
    } else {
        pattern.sidelobe_gain
    }
}

/// 20*log10(4*pi*f/c): free-space loss at 1 m.
pub fn free_space_reference_loss_db(carrier_frequency_hz: f64) -> f64 {
    const C: f64 = 299_792_458.0;
    20.0 * (4.0 * PI * carrier_frequency_hz / C).log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub carrier_frequency_hz: f64,
    pub pathloss_exponent: f64,
    /// Loss at the 1 m reference distance.
    pub reference_loss_db: f64,
    /// Per obstacle crossed.
    pub penetration_loss_db: f64,
    pub noise_power_dbm: f64,
    pub decode_snr_db: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            carrier_frequency_hz: 60e9,
            pathloss_exponent: 3.0,
            reference_loss_db: 68.0,
            penetration_loss_db: 30.0,
            // 2.16 GHz channel, 6 dB noise figure
            noise_power_dbm: thermal_noise_dbm(2.16e9, 6.0),
            decode_snr_db: 10.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.pathloss_exponent.is_finite() && self.pathloss_exponent > 0.0) {
            return Err(Error::config("pathloss_exponent", "must be positive"));
        }
        if !self.decode_snr_db.is_finite() {
            return Err(Error::config("decode_snr_db", "must be finite"));
        }
        if !(self.penetration_loss_db.is_finite() && self.penetration_loss_db >= 0.0) {
            return Err(Error::config("penetration_loss_db", "must be >= 0"));
        }
        if !self.noise_power_dbm.is_finite() || !self.reference_loss_db.is_finite() {
            return Err(Error::config("noise_power_dbm", "must be finite"));
        }
        Ok(())
    }

    pub fn noise_mw(&self) -> f64 {
        dbm_to_mw(self.noise_power_dbm)
    }

    pub fn decode_threshold(&self) -> f64 {
        dbm_to_mw(self.decode_snr_db)
    }

    /// Distance-dependent loss, dB, without blockage.
    pub fn pathloss_db(&self, distance: f64) -> f64 {
        self.reference_loss_db + 10.0 * self.pathloss_exponent * distance.max(1e-9).log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub tx_power_dbm: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        // 2.5 mW
        Self {
            tx_power_dbm: 10.0 * 2.5f64.log10(),
        }
    }
}

/// A positioned, oriented antenna.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Antenna {
    pub position: Point2D,
    pub boresight: f64,
    pub pattern: AntennaPattern,
}

/// Received power in dBm from `tx` at `rx`; `-inf` when either antenna has
/// zero gain along the path.
pub fn received_power_dbm(
    tx: &Antenna,
    rx: &Antenna,
    arena: &Arena,
    obstacles: &[Obstacle],
    channel: &ChannelParams,
    radio: &RadioConfig,
) -> f64 {
    let g_tx = antenna_gain(
        &tx.pattern,
        arena.bearing(tx.position, rx.position) - tx.boresight,
    );
    let g_rx = antenna_gain(
        &rx.pattern,
        arena.bearing(rx.position, tx.position) - rx.boresight,
    );
    if g_tx == 0.0 || g_rx == 0.0 {
        return f64::NEG_INFINITY;
    }
    let d = arena.distance(tx.position, rx.position);
    radio.tx_power_dbm + 10.0 * g_tx.log10() + 10.0 * g_rx.log10()
        - channel.pathloss_db(d)
        - arena.penetration_loss_db(tx.position, rx.position, obstacles)
}

/// Channel, transmit power and antenna sidelobe level shared by every link
/// of a deployment. Each link's pattern follows from its own beamwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioModel {
    pub channel: ChannelParams,
    pub radio: RadioConfig,
    pub sidelobe_gain: f64,
}

impl Default for RadioModel {
    fn default() -> Self {
        Self {
            channel: ChannelParams::default(),
            radio: RadioConfig::default(),
            sidelobe_gain: 0.0,
        }
    }
}

impl RadioModel {
    pub fn pattern(&self, beamwidth: f64) -> AntennaPattern {
        AntennaPattern::new(beamwidth, self.sidelobe_gain).expect("validated beamwidth")
    }

    pub fn tx_antenna(&self, link: &DirectedLink) -> Antenna {
        Antenna {
            position: link.tx,
            boresight: link.tx_boresight,
            pattern: self.pattern(link.beamwidth),
        }
    }

    pub fn rx_antenna(&self, link: &DirectedLink) -> Antenna {
        Antenna {
            position: link.rx,
            boresight: link.rx_boresight,
            pattern: self.pattern(link.beamwidth),
        }
    }

    /// Power from the transmitter of link `from` at the receiver of link
    /// `to`, dBm.
    pub fn link_power_dbm(&self, deployment: &Deployment, from: usize, to: usize) -> f64 {
        received_power_dbm(
            &self.tx_antenna(&deployment.links[from]),
            &self.rx_antenna(&deployment.links[to]),
            &deployment.arena,
            &deployment.obstacles,
            &self.channel,
            &self.radio,
        )
    }

    pub fn snr_db(&self, deployment: &Deployment, link: usize) -> f64 {
        self.link_power_dbm(deployment, link, link) - self.channel.noise_power_dbm
    }

    /// SINR of `link` with the transmitters in `active` switched on. The
    /// link's own transmitter is never counted as interference.
    pub fn sinr_db(&self, deployment: &Deployment, link: usize, active: &[usize]) -> f64 {
        let signal = dbm_to_mw(self.link_power_dbm(deployment, link, link));
        let interference: f64 = active
            .iter()
            .filter(|&&j| j != link)
            .map(|&j| dbm_to_mw(self.link_power_dbm(deployment, j, link)))
            .sum();
        if interference == 0.0 {
            return self.snr_db(deployment, link);
        }
        mw_to_dbm(signal / (self.channel.noise_mw() + interference))
    }

    /// Longest boresight-aligned, unblocked link that still meets the decode
    /// threshold.
    pub fn aligned_range(&self, beamwidth: f64) -> f64 {
        let g = 10.0 * self.pattern(beamwidth).mainlobe_gain().log10();
        let margin = self.radio.tx_power_dbm + 2.0 * g
            - self.channel.reference_loss_db
            - self.channel.noise_power_dbm
            - self.channel.decode_snr_db;
        10f64.powf(margin / (10.0 * self.channel.pathloss_exponent))
    }

    /// Transmit power, dBm, at which the aligned range equals `range`.
    pub fn tx_power_for_range(&self, beamwidth: f64, range: f64) -> f64 {
        let g = 10.0 * self.pattern(beamwidth).mainlobe_gain().log10();
        self.channel.decode_snr_db + self.channel.noise_power_dbm + self.channel.pathloss_db(range)
            - 2.0 * g
    }
}

/// Precomputed linear couplings for one deployment.
///
/// For every receiver the nonzero interferers are kept in descending power
/// order together with suffix sums, so a decode decision can usually stop
/// after a handful of terms: either the active interference already
/// exceeds the budget, or everything that is left could not.
#[derive(Debug, Clone)]
pub struct InterferenceMap {
    signal_mw: Vec<f64>,
    /// `S / threshold - N`: the largest tolerable interference, mW.
    budget_mw: Vec<f64>,
    interferers: Vec<Vec<(u32, f64)>>,
    tails: Vec<Vec<f64>>,
    noise_mw: f64,
}

impl InterferenceMap {
    pub fn build(deployment: &Deployment, model: &RadioModel) -> Self {
        let n = deployment.links.len();
        let noise_mw = model.channel.noise_mw();
        let threshold = model.channel.decode_threshold();
        let tx: Vec<Antenna> = deployment
            .links
            .iter()
            .map(|l| model.tx_antenna(l))
            .collect();
        let rx: Vec<Antenna> = deployment
            .links
            .iter()
            .map(|l| model.rx_antenna(l))
            .collect();

        let mut signal_mw = Vec::with_capacity(n);
        let mut budget_mw = Vec::with_capacity(n);
        let mut interferers = Vec::with_capacity(n);
        let mut tails = Vec::with_capacity(n);
        for i in 0..n {
            let power = |j: usize| {
                dbm_to_mw(received_power_dbm(
                    &tx[j],
                    &rx[i],
                    &deployment.arena,
                    &deployment.obstacles,
                    &model.channel,
                    &model.radio,
                ))
            };
            let s = power(i);
            signal_mw.push(s);
            budget_mw.push(s / threshold - noise_mw);

            let mut list: Vec<(u32, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j as u32, power(j)))
                .filter(|&(_, p)| p > 0.0)
                .collect();
            list.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let mut tail = vec![0.0; list.len() + 1];
            for k in (0..list.len()).rev() {
                tail[k] = tail[k + 1] + list[k].1;
            }
            interferers.push(list);
            tails.push(tail);
        }
        Self {
            signal_mw,
            budget_mw,
            interferers,
            tails,
            noise_mw,
        }
    }

    pub fn len(&self) -> usize {
        self.signal_mw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signal_mw.is_empty()
    }

    pub fn signal_mw(&self, link: usize) -> f64 {
        self.signal_mw[link]
    }

    pub fn noise_mw(&self) -> f64 {
        self.noise_mw
    }

    /// Interference each receiver can absorb before failing, mW. Negative
    /// when the link cannot close even without interference.
    pub fn budget_mw(&self, link: usize) -> f64 {
        self.budget_mw[link]
    }

    /// Interference-free SNR meets the decode threshold.
    pub fn covered(&self, link: usize) -> bool {
        self.budget_mw[link] >= 0.0
    }

    /// Nonzero interferers of `link` as `(index, mW)`, strongest first.
    pub fn interferers(&self, link: usize) -> &[(u32, f64)] {
        &self.interferers[link]
    }

    pub fn coupling_mw(&self, from: usize, to: usize) -> f64 {
        self.interferers[to]
            .iter()
            .find(|&&(j, _)| j as usize == from)
            .map_or(0.0, |&(_, p)| p)
    }

    /// Whether `link` decodes with the transmitters flagged in `active` on.
    pub fn decodes(&self, link: usize, active: &[bool]) -> bool {
        let budget = self.budget_mw[link];
        if budget < 0.0 {
            return false;
        }
        let list = &self.interferers[link];
        let tail = &self.tails[link];
        let mut acc = 0.0;
        for (k, &(j, p)) in list.iter().enumerate() {
            if acc + tail[k] <= budget {
                return true;
            }
            if active[j as usize] {
                acc += p;
                if acc > budget {
                    return false;
                }
            }
        }
        true
    }

    pub fn sinr_db(&self, link: usize, active: &[bool]) -> f64 {
        let interference: f64 = self.interferers[link]
            .iter()
            .filter(|&&(j, _)| active[j as usize])
            .map(|&(_, p)| p)
            .sum();
        mw_to_dbm(self.signal_mw[link] / (self.noise_mw + interference))
    }
}
