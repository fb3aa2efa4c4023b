//! Client-side station selection.
//!
//! Each client evaluates every candidate station with an estimator of the
//! throughput it would obtain there and selfishly picks the argmax. Two
//! estimators are provided: the Exact Simulator (ES) replays the online
//! proportional-fair scheduler with the client added to the cell, while the
//! Approximate Estimator (AE) needs only the cell's advertisement — its sum
//! weight and per-block average throughput, |Z|+1 values — and runs a greedy
//! water-filling pass over the blocks in O(|Z|) after a sort.
//!
//! For cells whose incumbents all look alike (every H_{j,z} equal to the
//! advertised per-block average), the AE value provably coincides with the
//! long-run throughput the online scheduler would deliver; the test suite
//! exercises that equivalence numerically.

use crate::netmodel::BaseStation;
use crate::channel::LinkRateTable;
use crate::scheduler::{run_online_pf, ScheduleState};

/// Candidate threshold: a station must offer at least 1 kbit/s (in nats/s)
/// on some block to be worth estimating.
pub const CANDIDATE_THRESHOLD_NATS: f64 = 1000.0 * std::f64::consts::LN_2;

/// Frames the Exact Simulator replays; enough that the online scheduler's
/// convergence noise sits well under 0.5%.
pub const EXACT_SIMULATOR_FRAMES: u64 = 2000;

/// What a station broadcasts at each association epoch: exactly |Z|+1 values.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAdvertisement {
    pub station: usize,
    /// w^m, the summed weight of currently associated clients.
    pub sum_weight: f64,
    /// H̄_{m,z} = Σ_{j: m(j)=m} φ_{j,z}·H_{j,z} per block.
    pub avg_block_throughput: Vec<f64>,
}

impl CellAdvertisement {
    /// Scalar count carried over the air (for overhead accounting).
    pub fn num_values(&self) -> usize {
        self.avg_block_throughput.len() + 1
    }
}

/// Builds a station's advertisement from its scheduler state and its members'
/// static rates (rows aligned with the state's local client indices).
pub fn build_advertisement(
    station: usize,
    member_weights: &[f64],
    member_rates: &[&[f64]],
    state: &ScheduleState,
) -> CellAdvertisement {
    assert_eq!(member_weights.len(), member_rates.len());
    assert_eq!(member_weights.len(), state.num_clients());
    let nz = state.num_blocks();
    let mut avg = vec![0.0; nz];
    for (j, rates) in member_rates.iter().enumerate() {
        for z in 0..nz {
            avg[z] += state.fraction(j, z) * rates[z];
        }
    }
    CellAdvertisement {
        station,
        sum_weight: member_weights.iter().sum(),
        avg_block_throughput: avg,
    }
}

/// What a client reports to the station it picked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationReport {
    pub client: usize,
    pub chosen: usize,
    /// r̂ at the chosen station.
    pub chosen_rate: f64,
    /// Best r̂ among the other candidates (0 when there is none).
    pub runner_up_rate: f64,
}

/// Active stations offering at least `threshold_nats` on some block.
pub fn candidate_set(
    client: usize,
    stations: &[BaseStation],
    rates: &LinkRateTable,
    threshold_nats: f64,
) -> Vec<usize> {
    stations
        .iter()
        .filter(|st| st.is_active())
        .filter(|st| (0..rates.num_blocks()).any(|z| rates.rate(client, st.id, z) >= threshold_nats))
        .map(|st| st.id)
        .collect()
}

/// Exact Simulator: replay the online PF policy on the cell's membership with
/// the candidate client appended, and read off its converged throughput.
pub fn exact_estimate(
    candidate_weight: f64,
    candidate_rates: &[f64],
    member_weights: &[f64],
    member_rates: &[&[f64]],
    frames: u64,
) -> f64 {
    let mut weights = member_weights.to_vec();
    weights.push(candidate_weight);
    let mut rows: Vec<&[f64]> = member_rates.to_vec();
    rows.push(candidate_rates);
    let state = run_online_pf(&weights, &rows, frames);
    state.avg_rate(rows.len() - 1)
}

/// Approximate Estimator output.
#[derive(Debug, Clone)]
pub struct ApproxEstimate {
    /// r̂_{i,m}.
    pub rate: f64,
    /// φ̂ per block, in [0,1], at most one strictly fractional.
    pub fractions: Vec<f64>,
    /// Instrumented operation count (comparisons and arithmetic in the greedy
    /// pass, excluding the sort's internal comparisons).
    pub ops: u64,
}

/// Approximate Estimator: greedy block-claiming over blocks sorted by how
/// cheap they are to take from the cell (H̄_z/H_z ascending).
///
/// Division conventions for the degenerate corners, which the algorithm's
/// fractions otherwise leave undefined:
/// - claim test right side: 0 when w⁻·H̄_z = 0 (nothing to defend), +∞ when
///   r̄ = H̄_z (the block is the cell's entire remaining throughput);
/// - stop test left side: +∞ when r̂ = 0 (a client with nothing yet never
///   stops), so a first unclaimed block falls through to the fractional split.
pub fn approximate_estimate(
    weight: f64,
    own_rates: &[f64],
    other_weight: f64,
    avg_throughput: &[f64],
) -> ApproxEstimate {
    assert_eq!(own_rates.len(), avg_throughput.len());
    let nz = own_rates.len();
    let mut fractions = vec![0.0; nz];
    let mut ops: u64 = 0;

    // Sort claimable blocks (H > 0) by H̄/H ascending, ties by block id.
    let mut order: Vec<usize> = (0..nz).filter(|&z| own_rates[z] > 0.0).collect();
    ops += nz as u64; // ratio per block
    order.sort_by(|&a, &b| {
        let ra = avg_throughput[a] / own_rates[a];
        let rb = avg_throughput[b] / own_rates[b];
        ra.partial_cmp(&rb).unwrap().then(a.cmp(&b))
    });

    let mut r_hat = 0.0;
    let mut r_bar: f64 = avg_throughput.iter().sum();
    ops += nz as u64; // r̄ accumulation

    for &z in &order {
        let h = own_rates[z];
        let h_bar = avg_throughput[z];
        let claim_lhs = weight * h / (r_hat + h);
        let claim_rhs = if other_weight * h_bar == 0.0 {
            0.0
        } else if r_bar - h_bar <= 0.0 {
            f64::INFINITY
        } else {
            other_weight * h_bar / (r_bar - h_bar)
        };
        ops += 6;
        if claim_lhs > claim_rhs {
            fractions[z] = 1.0;
            r_hat += h;
            r_bar -= h_bar;
            ops += 2;
            continue;
        }
        let stop_lhs = if r_hat > 0.0 { weight * h / r_hat } else { f64::INFINITY };
        let stop_rhs = if r_bar > 0.0 { other_weight * h_bar / r_bar } else { 0.0 };
        ops += 4;
        if stop_lhs < stop_rhs {
            break;
        }
        // Fractional boundary block.
        let denom = (other_weight + weight) * h * h_bar;
        ops += 8;
        if denom > 0.0 {
            let phi = ((r_bar * weight * h - r_hat * other_weight * h_bar) / denom).clamp(0.0, 1.0);
            fractions[z] = phi;
            r_hat += phi * h;
        }
        break;
    }

    ApproxEstimate { rate: r_hat, fractions, ops }
}

/// Picks the argmax estimate (ties to the lowest station id) and fills in the
/// runner-up rate from the remaining candidates.
pub fn choose_station(client: usize, estimates: &[(usize, f64)]) -> Option<AssociationReport> {
    let mut best: Option<(usize, f64)> = None;
    for &(m, r) in estimates {
        best = match best {
            None => Some((m, r)),
            Some((bm, br)) => {
                if r > br || (r == br && m < bm) {
                    Some((m, r))
                } else {
                    Some((bm, br))
                }
            }
        };
    }
    let (chosen, chosen_rate) = best?;
    let runner_up_rate = estimates
        .iter()
        .filter(|&&(m, _)| m != chosen)
        .map(|&(_, r)| r)
        .fold(0.0f64, f64::max);
    Some(AssociationReport { client, chosen, chosen_rate, runner_up_rate })
}
