//! Base-station sleep and wake decisions.
//!
//! An active station compares the proportional-fairness value its clients get
//! from it (less its own energy cost) against what they would get from their
//! runner-up stations, and sleeps when the move pays for its operation power.
//! A sleeping station periodically beacons at equal power so clients can
//! measure the solo rate they would get from it; clients that would gain
//! report in, the station estimates which of them would actually join
//! (Wakeup Estimator), and wakes when the estimated welfare gain beats its
//! operation cost. Both comparisons difference logarithms of rates, so they
//! are invariant to the rate unit.

use crate::channel::{GainTensor, DENOM_GUARD_W};
use crate::netmodel::{BaseStation, Client, PowerAllocation, ResourceBlockGrid};
use crate::par;

/// Beacons are sent every this many association epochs.
pub const BEACON_PERIOD_EPOCHS: u64 = 5;

/// What a client sends to a sleeping station after hearing its beacon.
/// Submitted only when the solo estimate beats the client's current
/// throughput; `current_rate` is 0 for a currently uncovered client, which
/// makes the client's claim infinitely strong.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WakeReport {
    pub client: usize,
    pub weight: f64,
    /// r̂_{i,m1} = Σ_z H_{i,m1,z} under the beacon's equal-power row.
    pub solo_rate: f64,
    /// The client's realized throughput over the last epoch window.
    pub current_rate: f64,
}

/// Output of the Wakeup Estimator: the estimated joiner set and its weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WakeDecisionState {
    /// Client ids admitted to S, in admission order.
    pub joiners: Vec<usize>,
    /// ŵ^{m1} = Σ_{i∈S} w_i.
    pub est_weight: f64,
}

/// Active→sleep comparison. `reports` holds (weight, r̂ at this station,
/// r̂ at the runner-up) for every client the station would serve.
///
/// A = Σ w·ln r̂_self − ζC is the value of staying on; B = Σ w·ln r̂_alt the
/// value of switching everyone to their runner-ups. The station sleeps iff
/// B > A; a client with no runner-up (rate 0) drives B to −∞ and pins the
/// station on. With no clients at all the comparison degenerates to
/// 0 > −ζC, so an idle station sleeps exactly when its energy has a price.
/// Returns (sleep?, margin B − A).
pub fn sleep_decision(energy_price: f64, operation_power_w: f64, reports: &[(f64, f64, f64)]) -> (bool, f64) {
    let mut stay = -energy_price * operation_power_w;
    let mut leave = 0.0;
    for &(w, r_self, r_alt) in reports {
        stay += w * r_self.ln();
        leave += w * r_alt.ln();
    }
    let margin = leave - stay;
    (leave > stay, margin)
}

/// Solo rates r̂_{i,m1} for every client if sleeping station `m1` served it
/// alone: H summed over blocks, with m1 transmitting its equal-power level
/// W/|F| and everyone else interfering at the current allocation.
pub fn beacon_solo_rates(
    m1: usize,
    tensor: &GainTensor,
    grid: &ResourceBlockGrid,
    stations: &[BaseStation],
    clients: &[Client],
    alloc: &PowerAllocation,
) -> Vec<f64> {
    let per_block = stations[m1].power_budget_w / grid.num_freq_chunks as f64;
    let nch = grid.num_freq_chunks;
    let nz = grid.num_blocks();
    let b_hz = grid.block_bandwidth_hz;
    let interferers: Vec<usize> =
        (0..stations.len()).filter(|&l| l != m1 && stations[l].is_active()).collect();
    par::map_slice(clients, |c| {
        let own: Vec<f64> = (0..nch).map(|ch| tensor.static_gain(c.id, m1, ch)).collect();
        let other: Vec<Vec<f64>> = interferers
            .iter()
            .map(|&l| (0..nch).map(|ch| tensor.static_gain(c.id, l, ch)).collect())
            .collect();
        let mut total = 0.0;
        for z in 0..nz {
            let ch = grid.chunk_of(z);
            let mut denom = c.noise_w[z];
            for (k, &l) in interferers.iter().enumerate() {
                denom += other[k][ch] * alloc.get(l, z);
            }
            let signal = own[ch] * per_block;
            if signal > 0.0 {
                total += b_hz * (signal / denom.max(DENOM_GUARD_W)).ln_1p();
            }
        }
        total
    })
}

/// Wakeup Estimator: sort reporters by (r̂/r)·w descending (client id breaks
/// ties) and admit each whose key exceeds the accumulated weight plus its
/// own. Every reporter gets its test — a rejection does not stop the scan.
pub fn wakeup_estimator(reports: &[WakeReport]) -> WakeDecisionState {
    let key = |r: &WakeReport| {
        if r.current_rate > 0.0 {
            r.solo_rate / r.current_rate * r.weight
        } else {
            f64::INFINITY
        }
    };
    let mut order: Vec<&WakeReport> = reports.iter().collect();
    order.sort_by(|a, b| key(b).partial_cmp(&key(a)).unwrap().then(a.client.cmp(&b.client)));

    let mut joiners = Vec::new();
    let mut est_weight = 0.0;
    let mut excluded: Vec<(f64, f64)> = Vec::new();
    for rep in &order {
        let k = key(rep);
        if k > est_weight + rep.weight {
            joiners.push(rep.client);
            est_weight += rep.weight;
        } else {
            excluded.push((k, rep.weight));
        }
    }

    // The estimate justifies itself: every admitted client would beat its
    // current rate even after the whole set S joins (keys are sorted, so each
    // admitted key exceeds the final weight), and every rejected client would
    // not, once its own weight is added on top of S's.
    if !joiners.is_empty() {
        for rep in &order {
            if joiners.contains(&rep.client) {
                debug_assert!(key(rep) > est_weight);
            }
        }
    }
    for &(k, w) in &excluded {
        debug_assert!(k <= est_weight + w);
    }

    WakeDecisionState { joiners, est_weight }
}

/// Sleep→active comparison: wake iff
/// Σ_{i∈S} w_i·[ln(r̂_{i,m1}·w_i/ŵ^{m1}) − ln r_i] − ζ·C > 0.
/// Returns (wake?, margin). An empty S never wakes.
pub fn wake_decision(
    energy_price: f64,
    operation_power_w: f64,
    state: &WakeDecisionState,
    reports: &[WakeReport],
) -> (bool, f64) {
    if state.joiners.is_empty() {
        return (false, -energy_price * operation_power_w);
    }
    let mut gain = 0.0;
    for rep in reports {
        if state.joiners.contains(&rep.client) {
            let projected = rep.solo_rate * rep.weight / state.est_weight;
            gain += rep.weight * (projected.ln() - rep.current_rate.ln());
        }
    }
    let margin = gain - energy_price * operation_power_w;
    (margin > 0.0, margin)
}
