//! Objective and figure-of-merit computation.
//!
//! Scheduling and estimation run in nats/s internally; this module is the
//! single place where rates cross into kbit/s for reporting, so the logged
//! proportional-fairness index matches the convention of the reported
//! figures. The objective is Σ w_i·ln r_i − Σ ζ_m·(transmission power) −
//! Σ ζ_m·C_m, and an uncovered client (r_i = 0) drives it to −∞ — carried
//! as an IEEE infinity, which formats as `-inf` in the CSV, never a fault.

use crate::channel::nats_to_kbit;
use crate::netmodel::{BaseStation, Client, PowerAllocation, ResourceBlockGrid};

/// One reporting row; all rates are kbit/s at this layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub epoch: u64,
    /// pf_index − tx_cost − op_cost; −∞ iff some client rate is 0.
    pub objective: f64,
    /// Σ w_i·ln r_i.
    pub pf_index: f64,
    /// Σ_m ζ_m·Σ_z P_{m,z}/|Q| (mean transmission power, priced).
    pub tx_cost: f64,
    /// Σ ζ_m·C_m over active stations serving at least one client.
    pub op_cost: f64,
    /// Σ w_i·r_i.
    pub weighted_throughput: f64,
    /// Mean transmission power plus operation power of every active station.
    pub total_power_w: f64,
    /// weighted_throughput / total_power_w (0 when no power is spent).
    pub energy_efficiency: f64,
    pub active_station_count: usize,
}

pub const CSV_HEADER: &str =
    "epoch,objective,pf_index,tx_cost,op_cost,weighted_throughput,total_power,energy_efficiency,active_station_count";

impl MetricsRecord {
    /// The CSV row matching [`CSV_HEADER`]. Infinities format as `inf`/`-inf`.
    pub fn csv_row(&self) -> String {
        format!("{},{}", self.epoch, self.csv_fields())
    }

    /// Every column after `epoch`, for consumers that prefix their own keys
    /// (e.g. sweep summaries keyed by price or distance).
    pub fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.objective,
            self.pf_index,
            self.tx_cost,
            self.op_cost,
            self.weighted_throughput,
            self.total_power_w,
            self.energy_efficiency,
            self.active_station_count
        )
    }
}

/// Evaluates the objective and all reported figures for one snapshot.
/// `rates_nats` is each client's window-average throughput in nats/s.
pub fn evaluate(
    epoch: u64,
    clients: &[Client],
    rates_nats: &[f64],
    stations: &[BaseStation],
    alloc: &PowerAllocation,
    grid: &ResourceBlockGrid,
) -> MetricsRecord {
    assert_eq!(clients.len(), rates_nats.len());

    let mut pf_index = 0.0;
    let mut weighted_throughput = 0.0;
    for (c, &r) in clients.iter().zip(rates_nats) {
        let kbit = nats_to_kbit(r);
        weighted_throughput += c.weight * kbit;
        pf_index += if kbit > 0.0 { c.weight * kbit.ln() } else { f64::NEG_INFINITY };
    }

    let mut served = vec![0usize; stations.len()];
    for c in clients {
        if let Some(m) = c.association {
            served[m] += 1;
        }
    }

    let mut tx_cost = 0.0;
    let mut op_cost = 0.0;
    let mut total_power_w = 0.0;
    let mut active_station_count = 0;
    for st in stations {
        let mean_tx = alloc.station_mean_power_w(st.id, grid);
        tx_cost += st.energy_price * mean_tx;
        total_power_w += mean_tx;
        if st.is_active() {
            active_station_count += 1;
            total_power_w += st.operation_power_w;
            if served[st.id] > 0 {
                op_cost += st.energy_price * st.operation_power_w;
            }
        }
    }

    let objective = pf_index - tx_cost - op_cost;
    let energy_efficiency = if total_power_w > 0.0 { weighted_throughput / total_power_w } else { 0.0 };

    MetricsRecord {
        epoch,
        objective,
        pf_index,
        tx_cost,
        op_cost,
        weighted_throughput,
        total_power_w,
        energy_efficiency,
        active_station_count,
    }
}
