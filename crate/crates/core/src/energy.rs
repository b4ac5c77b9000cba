//! Energy model of the UAV-assisted clustered sensor network.
//!
//! Three groups of formulas live here:
//!
//! * the air-to-ground channel (line-of-sight probability, average path
//!   loss, achievable uplink rate),
//! * the rotary-wing UAV (hover power, horizontal movement power, flight
//!   and hover energy),
//! * the ground network (first-order radio model for member-to-head
//!   transmissions plus the head-to-UAV uplink).
//!
//! [`evaluate_solution`] combines them into the weighted objective that every
//! solver in this crate minimises. All energies are in joules.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{distance, Instance, Point, Tour};

/// Physical constants of the channel, the UAV and the sensor radios.
///
/// Defaults reproduce the reference simulation setup. The gravity, air
/// density, message size and objective weight have no published value and
/// use conventional choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyParams {
    /// Free-space amplifier energy, J/bit/m².
    pub eps_fs: f64,
    /// Multipath amplifier energy, J/bit/m⁴.
    pub eps_mp: f64,
    /// Radio electronics energy, J/bit.
    pub e_elec: f64,
    /// Total transmit power of a cluster head, dBm.
    pub p_ch_dbm: f64,
    /// Nominal nodes per cluster. Per-cluster computations use the actual
    /// cluster size; this value feeds the standalone uplink formula.
    pub n_per_cluster: usize,
    pub bandwidth_hz: f64,
    /// Noise power spectral density, dBm/Hz.
    pub noise_dbm_hz: f64,
    pub carrier_hz: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Flight altitude, m.
    pub height_m: f64,
    pub mu_los_db: f64,
    pub mu_nlos_db: f64,
    pub beta: f64,
    pub eta: f64,
    pub v_uav_ms: f64,
    pub v_max_ms: f64,
    pub mass_kg: f64,
    pub rotor_radius_m: f64,
    pub n_props: u32,
    pub p_max_w: f64,
    pub p_idle_w: f64,
    pub p_com_w: f64,
    pub gravity_ms2: f64,
    pub air_density_kgm3: f64,
    /// Bits in one member-node message.
    pub msg_bits: f64,
    /// Weight of the ground energy in the objective; the UAV gets `1 - omega`.
    pub omega: f64,
    pub light_speed_ms: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            eps_fs: 10e-12,
            eps_mp: 0.0013e-12,
            e_elec: 50e-9,
            p_ch_dbm: 21.0,
            n_per_cluster: 20,
            bandwidth_hz: 1e6,
            noise_dbm_hz: -174.0,
            carrier_hz: 2e9,
            alpha: 3.0,
            height_m: 50.0,
            mu_los_db: 1.0,
            mu_nlos_db: 20.0,
            beta: 0.03,
            eta: 10.0,
            v_uav_ms: 15.0,
            v_max_ms: 15.0,
            mass_kg: 0.5,
            rotor_radius_m: 0.2,
            n_props: 4,
            p_max_w: 5.0,
            p_idle_w: 0.0,
            p_com_w: 0.0126,
            gravity_ms2: 9.81,
            air_density_kgm3: 1.225,
            msg_bits: 4000.0,
            omega: 0.5,
            light_speed_ms: 3e8,
        }
    }
}

impl EnergyParams {
    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eps_fs", self.eps_fs),
            ("eps_mp", self.eps_mp),
            ("e_elec", self.e_elec),
            ("bandwidth_hz", self.bandwidth_hz),
            ("carrier_hz", self.carrier_hz),
            ("height_m", self.height_m),
            ("v_uav_ms", self.v_uav_ms),
            ("v_max_ms", self.v_max_ms),
            ("mass_kg", self.mass_kg),
            ("rotor_radius_m", self.rotor_radius_m),
            ("p_max_w", self.p_max_w),
            ("p_com_w", self.p_com_w),
            ("gravity_ms2", self.gravity_ms2),
            ("air_density_kgm3", self.air_density_kgm3),
            ("msg_bits", self.msg_bits),
            ("light_speed_ms", self.light_speed_ms),
            ("beta", self.beta),
            ("eta", self.eta),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and positive, got {value}"
                )));
            }
        }
        let finite = [
            ("p_ch_dbm", self.p_ch_dbm),
            ("noise_dbm_hz", self.noise_dbm_hz),
            ("mu_los_db", self.mu_los_db),
            ("mu_nlos_db", self.mu_nlos_db),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite")));
            }
        }
        if self.n_per_cluster == 0 || self.n_props == 0 {
            return Err(Error::InvalidParams(
                "n_per_cluster and n_props must be at least 1".into(),
            ));
        }
        if !(self.p_idle_w.is_finite() && self.p_idle_w >= 0.0) {
            return Err(Error::InvalidParams("p_idle_w must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(Error::InvalidParams(format!(
                "omega must lie in [0, 1], got {}",
                self.omega
            )));
        }
        if self.v_uav_ms > self.v_max_ms {
            return Err(Error::InvalidParams(format!(
                "v_uav_ms ({}) exceeds v_max_ms ({})",
                self.v_uav_ms, self.v_max_ms
            )));
        }
        if !(self.alpha >= 2.0) {
            return Err(Error::InvalidParams(format!(
                "alpha must be >= 2, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Per-component energies of one complete solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub e_ground_j: f64,
    pub e_uav_flight_j: f64,
    pub e_uav_hover_j: f64,
    pub e_total_weighted_j: f64,
}

impl EnergyBreakdown {
    pub fn e_uav_j(&self) -> f64 {
        self.e_uav_flight_j + self.e_uav_hover_j
    }

    /// Recomputes the weighted total from the components.
    pub fn recomposed(&self, omega: f64) -> f64 {
        omega * self.e_ground_j + (1.0 - omega) * self.e_uav_j()
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Elevation angle in degrees of a UAV at `height_m` seen from a ground node
/// at slant distance `slant_m`.
pub fn elevation_angle_deg(height_m: f64, slant_m: f64) -> f64 {
    (height_m / slant_m).clamp(-1.0, 1.0).asin().to_degrees()
}

/// Line-of-sight probability at an arbitrary elevation angle.
pub fn los_probability_at(params: &EnergyParams, elevation_deg: f64) -> f64 {
    1.0 / (1.0 + params.eta * (-params.beta * (elevation_deg - params.eta)).exp())
}

/// Line-of-sight probability of a head directly below the hovering UAV
/// (slant distance equals the altitude, so the elevation is 90°).
pub fn los_probability(params: &EnergyParams) -> f64 {
    los_probability_at(params, 90.0)
}

/// Free-space reference loss `10 α log10(4π f_c H / c)` in dB.
pub fn reference_path_loss_db(params: &EnergyParams) -> f64 {
    10.0 * params.alpha
        * (4.0 * PI * params.carrier_hz * params.height_m / params.light_speed_ms).log10()
}

pub fn average_path_loss_db(params: &EnergyParams) -> f64 {
    let p_los = los_probability(params);
    let k0 = reference_path_loss_db(params);
    p_los * (k0 + params.mu_los_db) + (1.0 - p_los) * (k0 + params.mu_nlos_db)
}

/// Linear SNR at the UAV: head power minus average loss over the noise
/// integrated across the band.
pub fn snr_linear(params: &EnergyParams) -> f64 {
    let noise_dbm = params.noise_dbm_hz + 10.0 * params.bandwidth_hz.log10();
    let snr_db = params.p_ch_dbm - average_path_loss_db(params) - noise_dbm;
    10f64.powf(snr_db / 10.0)
}

pub fn shannon_rate_bps(bandwidth_hz: f64, snr: f64) -> f64 {
    bandwidth_hz * (1.0 + snr).log2()
}

pub fn data_rate_bps(params: &EnergyParams) -> f64 {
    shannon_rate_bps(params.bandwidth_hz, snr_linear(params))
}

pub fn hover_power_w(params: &EnergyParams) -> f64 {
    let weight = params.mass_kg * params.gravity_ms2;
    let disk = 2.0
        * PI
        * params.rotor_radius_m.powi(2)
        * f64::from(params.n_props)
        * params.air_density_kgm3;
    (weight.powi(3) / disk).sqrt()
}

/// Energy spent hovering while `data_bits` are uplinked; the hover time
/// equals the transmission time.
pub fn hover_energy_j(params: &EnergyParams, data_bits: f64) -> f64 {
    data_bits / data_rate_bps(params) * (hover_power_w(params) + params.p_com_w)
}

pub fn move_power_w(params: &EnergyParams) -> f64 {
    (params.p_max_w - params.p_idle_w) / params.v_max_ms * params.v_uav_ms + params.p_idle_w
}

/// Cruise energy over a horizontal path. Hover power is drawn during cruise
/// in addition to the movement power.
pub fn flight_energy_j(params: &EnergyParams, tour_length_m: f64) -> f64 {
    tour_length_m / params.v_uav_ms * (hover_power_w(params) + move_power_w(params))
}

/// Free-space / multipath crossover distance of the radio amplifier.
pub fn crossover_distance_m(params: &EnergyParams) -> f64 {
    (params.eps_fs / params.eps_mp).sqrt()
}

/// Energy for one member node to send its message over `distance_m`.
pub fn member_tx_energy_j(params: &EnergyParams, distance_m: f64) -> f64 {
    let l = params.msg_bits;
    let amp = if distance_m <= crossover_distance_m(params) {
        params.eps_fs * distance_m.powi(2)
    } else {
        params.eps_mp * distance_m.powi(4)
    };
    l * params.e_elec + l * amp
}

/// Energy for a cluster head to receive one member message.
pub fn ch_rx_energy_j(params: &EnergyParams) -> f64 {
    params.msg_bits * params.e_elec
}

/// Uplink energy of a head relaying `members` member messages.
pub fn uplink_energy_for(params: &EnergyParams, members: usize) -> f64 {
    dbm_to_watts(params.p_ch_dbm) * members as f64 * params.msg_bits / data_rate_bps(params)
}

/// Uplink energy of a head in a cluster of `n_per_cluster` nodes.
pub fn ch_uplink_energy_j(params: &EnergyParams) -> f64 {
    uplink_energy_for(params, params.n_per_cluster.saturating_sub(1))
}

/// Ground energy of one cluster when `ch_index` acts as its head.
pub fn cluster_ground_energy_j(params: &EnergyParams, cluster: &[Point], ch_index: usize) -> Result<f64> {
    let head = *cluster.get(ch_index).ok_or(Error::HeadOutOfRange {
        cluster: 0,
        index: ch_index,
        len: cluster.len(),
    })?;
    Ok(ClusterCosts::new(params).ground(cluster, head, ch_index))
}

/// Scalars shared by every per-cluster and per-metre computation, evaluated
/// once so that hot loops avoid repeated logarithms and square roots.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ClusterCosts {
    rate_bps: f64,
    hover_plus_com_w: f64,
    p_ch_w: f64,
    d0: f64,
    rx_j: f64,
    tx_elec_j: f64,
    l_eps_fs: f64,
    l_eps_mp: f64,
    msg_bits: f64,
    /// Joules per metre of horizontal flight.
    pub flight_j_per_m: f64,
}

impl ClusterCosts {
    pub fn new(params: &EnergyParams) -> Self {
        let p_hover = hover_power_w(params);
        Self {
            rate_bps: data_rate_bps(params),
            hover_plus_com_w: p_hover + params.p_com_w,
            p_ch_w: dbm_to_watts(params.p_ch_dbm),
            d0: crossover_distance_m(params),
            rx_j: ch_rx_energy_j(params),
            tx_elec_j: params.msg_bits * params.e_elec,
            l_eps_fs: params.msg_bits * params.eps_fs,
            l_eps_mp: params.msg_bits * params.eps_mp,
            msg_bits: params.msg_bits,
            flight_j_per_m: (p_hover + move_power_w(params)) / params.v_uav_ms,
        }
    }

    fn member_tx(&self, d: f64) -> f64 {
        let amp = if d <= self.d0 {
            self.l_eps_fs * d * d
        } else {
            self.l_eps_mp * d * d * d * d
        };
        self.tx_elec_j + amp
    }

    pub fn ground(&self, cluster: &[Point], head: Point, ch_index: usize) -> f64 {
        let members = cluster.len() - 1;
        let mut total = 0.0;
        for (i, &node) in cluster.iter().enumerate() {
            if i != ch_index {
                total += self.member_tx(distance(node, head)) + self.rx_j;
            }
        }
        total + self.p_ch_w * members as f64 * self.msg_bits / self.rate_bps
    }

    pub fn hover(&self, cluster_len: usize) -> f64 {
        let bits = cluster_len.saturating_sub(1) as f64 * self.msg_bits;
        bits / self.rate_bps * self.hover_plus_com_w
    }
}

/// Coordinates of the hovering points in visiting order, closed at the start.
pub fn head_polyline(instance: &Instance, tour: &Tour, ch_choices: &[usize]) -> Vec<Point> {
    let mut pts = Vec::with_capacity(tour.len() + 1);
    for &item in tour.order() {
        if item == 0 {
            pts.push(instance.start);
        } else {
            pts.push(instance.clusters[item - 1].nodes[ch_choices[item - 1]]);
        }
    }
    pts.push(instance.start);
    pts
}

pub fn tour_length_m(instance: &Instance, tour: &Tour, ch_choices: &[usize]) -> f64 {
    head_polyline(instance, tour, ch_choices)
        .windows(2)
        .map(|w| distance(w[0], w[1]))
        .sum()
}

fn check_choices(instance: &Instance, tour: &Tour, ch_choices: &[usize]) -> Result<()> {
    tour.check_against(instance.k())?;
    if ch_choices.len() != instance.k() {
        return Err(Error::InvalidTour(format!(
            "expected {} cluster-head choices, got {}",
            instance.k(),
            ch_choices.len()
        )));
    }
    for (k, (&ch, cluster)) in ch_choices.iter().zip(&instance.clusters).enumerate() {
        if ch >= cluster.nodes.len() {
            return Err(Error::HeadOutOfRange {
                cluster: k,
                index: ch,
                len: cluster.nodes.len(),
            });
        }
    }
    Ok(())
}

/// Weighted energy of a closed tour through the chosen cluster heads.
///
/// `ch_choices[k]` indexes the head inside cluster `k` (clusters are in
/// instance order, not visiting order).
pub fn evaluate_solution(
    params: &EnergyParams,
    instance: &Instance,
    tour: &Tour,
    ch_choices: &[usize],
) -> Result<EnergyBreakdown> {
    check_choices(instance, tour, ch_choices)?;
    let costs = ClusterCosts::new(params);

    let mut e_ground = 0.0;
    let mut e_hover = 0.0;
    for (cluster, &ch) in instance.clusters.iter().zip(ch_choices) {
        e_ground += costs.ground(&cluster.nodes, cluster.nodes[ch], ch);
        e_hover += costs.hover(cluster.nodes.len());
    }
    let e_flight = flight_energy_j(params, tour_length_m(instance, tour, ch_choices));

    let breakdown = EnergyBreakdown {
        e_ground_j: e_ground,
        e_uav_flight_j: e_flight,
        e_uav_hover_j: e_hover,
        e_total_weighted_j: 0.0,
    };
    Ok(EnergyBreakdown {
        e_total_weighted_j: breakdown.recomposed(params.omega),
        ..breakdown
    })
}
