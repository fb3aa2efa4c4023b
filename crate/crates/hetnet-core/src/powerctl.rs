//! Distributed power control.
//!
//! Each station optimizes a cell-level utility
//! U(P) = Σ_m w^m·ln(Σ_z B·ln(1+SINR_{m,z})) − Σ_m ζ_m·Σ_z P_{m,z}/|Q|
//! where SINR_{m,z} is an approximate per-cell SINR built from the mean
//! client gain of the cell, the mean client noise, and station-to-station
//! gains for interference. Stations exchange [`NeighborReport`]s and take
//! simultaneous projected-gradient steps from a common snapshot.
//!
//! The bandwidth factor B cancels in the gradient (it only shifts each cell's
//! log-utility by an additive constant), so the closed-form gradient works
//! with R_m = Σ_z ln(1+SINR_{m,z}) while the utility keeps B for reporting.
//!
//! Step sizing is an adaptive two-sided ladder: the step α doubles while the
//! joint candidate keeps improving the utility, otherwise halves, and the
//! best candidate found is accepted only when it clears a minimum-improvement
//! gate δ. The gate stops the controller from chasing refinements smaller
//! than the cell model's own approximation error (which can realize as
//! losses for the true per-client objective): far-apart cells simply hold
//! equal power, while strongly coupled cells still take the large
//! interference-avoiding steps.

use crate::channel::{GainTensor, DENOM_GUARD_W};
use crate::netmodel::{BaseStation, Client, PowerAllocation, ResourceBlockGrid};
use crate::par;
use serde::{Deserialize, Serialize};

/// Tuning of the power controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCtlParams {
    /// Initial line-search step α (adapted and carried across updates).
    pub alpha_init: f64,
    /// Minimum-improvement gate δ: a joint step is applied only if it improves
    /// the cell utility by at least this much (0 disables the gate).
    pub min_improvement: f64,
    /// Neighbors whose strongest station-to-station chunk gain is below this
    /// are pruned from the gradient exchange.
    pub neighbor_gain_threshold: f64,
    /// Frames between power updates.
    pub update_period: u64,
}

impl Default for PowerCtlParams {
    fn default() -> Self {
        PowerCtlParams {
            alpha_init: 1.0,
            min_improvement: 0.2,
            neighbor_gain_threshold: default_neighbor_threshold(),
            update_period: 10,
        }
    }
}

/// Default pruning threshold: the linear gain of the unshadowed path loss at
/// 1.5 km — stations further out have negligible influence on the gradient.
pub fn default_neighbor_threshold() -> f64 {
    crate::channel::db_loss_to_linear_gain(crate::channel::path_loss_db(1.5))
}

/// Cell-level channel approximation per station: arithmetic means over the
/// currently associated clients. A station without clients keeps its last
/// known means (frozen) and takes no gradient steps (its sum weight is 0).
#[derive(Debug, Clone)]
pub struct CellModel {
    /// Mean client gain per chunk, G_{m,m,·}.
    pub own_gain: Vec<Vec<f64>>,
    /// Mean client noise per block, N_{m,·}.
    pub noise: Vec<Vec<f64>>,
    /// Sum weight w^m of associated clients.
    pub sum_weight: Vec<f64>,
}

/// (Re)computes cell means from current associations, carrying forward the
/// previous means for stations that currently serve no clients.
pub fn compute_cell_model(
    prev: Option<&CellModel>,
    tensor: &GainTensor,
    grid: &ResourceBlockGrid,
    stations: &[BaseStation],
    clients: &[Client],
) -> CellModel {
    let nm = stations.len();
    let nch = grid.num_freq_chunks;
    let nz = grid.num_blocks();
    let mut own_gain = vec![vec![0.0; nch]; nm];
    let mut noise = vec![vec![0.0; nz]; nm];
    let mut sum_weight = vec![0.0; nm];
    let mut count = vec![0usize; nm];
    for c in clients {
        if let Some(m) = c.association {
            count[m] += 1;
            sum_weight[m] += c.weight;
            for ch in 0..nch {
                own_gain[m][ch] += tensor.static_gain(c.id, m, ch);
            }
            for z in 0..nz {
                noise[m][z] += c.noise_w[z];
            }
        }
    }
    for m in 0..nm {
        if count[m] > 0 {
            let inv = 1.0 / count[m] as f64;
            own_gain[m].iter_mut().for_each(|g| *g *= inv);
            noise[m].iter_mut().for_each(|n| *n *= inv);
        } else if let Some(prev) = prev {
            own_gain[m].copy_from_slice(&prev.own_gain[m]);
            noise[m].copy_from_slice(&prev.noise[m]);
        }
    }
    CellModel { own_gain, noise, sum_weight }
}

/// What one station measures about itself under a given allocation; the raw
/// material of both its neighbor report and its own gradient term.
#[derive(Debug, Clone)]
pub struct CellSnapshot {
    /// N_{m,z} + Σ_{l≠m} G_{m,l,z}·P_{l,z} per block.
    pub interference_plus_noise: Vec<f64>,
    /// G_{m,m,z}·P_{m,z} per block.
    pub received_signal: Vec<f64>,
    /// R_m = Σ_z ln(1 + SINR_{m,z}) (no bandwidth factor).
    pub total_log_throughput: f64,
}

/// The values station `from` shares each power period.
#[derive(Debug, Clone)]
pub struct NeighborReport {
    pub from: usize,
    /// w^o.
    pub sum_weight: f64,
    /// Per-block gain G_{o,m,z} from the receiving station m into this cell
    /// (station-to-station; constant across a chunk's slots).
    pub gain_from_receiver: Vec<f64>,
    /// Per-block interference-plus-noise seen by this cell.
    pub interference_plus_noise: Vec<f64>,
    /// Per-block received own signal.
    pub received_signal: Vec<f64>,
    /// Scalar R_o.
    pub total_log_throughput: f64,
}

impl NeighborReport {
    /// Number of scalar values this report carries (for overhead accounting).
    pub fn num_values(&self) -> usize {
        1 + self.gain_from_receiver.len() + self.interference_plus_noise.len() + self.received_signal.len() + 1
    }
}

/// Approximate per-cell SINR on one block under the cell model.
pub fn cell_sinr(
    m: usize,
    z: usize,
    model: &CellModel,
    tensor: &GainTensor,
    stations: &[BaseStation],
    alloc: &PowerAllocation,
    grid: &ResourceBlockGrid,
) -> f64 {
    let chunk = grid.chunk_of(z);
    let signal = model.own_gain[m][chunk] * alloc.get(m, z);
    if signal <= 0.0 {
        return 0.0;
    }
    let mut denom = model.noise[m][z];
    for l in 0..stations.len() {
        if l != m && stations[l].is_active() {
            denom += tensor.station_gain(m, l, chunk) * alloc.get(l, z);
        }
    }
    signal / denom.max(DENOM_GUARD_W)
}

pub fn snapshot_for(
    m: usize,
    model: &CellModel,
    tensor: &GainTensor,
    stations: &[BaseStation],
    alloc: &PowerAllocation,
    grid: &ResourceBlockGrid,
) -> CellSnapshot {
    let nz = grid.num_blocks();
    let mut interference_plus_noise = Vec::with_capacity(nz);
    let mut received_signal = Vec::with_capacity(nz);
    let mut total_log = 0.0;
    for z in 0..nz {
        let chunk = grid.chunk_of(z);
        let mut denom = model.noise[m][z];
        for l in 0..stations.len() {
            if l != m && stations[l].is_active() {
                denom += tensor.station_gain(m, l, chunk) * alloc.get(l, z);
            }
        }
        let signal = model.own_gain[m][chunk] * alloc.get(m, z);
        if denom > DENOM_GUARD_W && signal > 0.0 {
            total_log += (signal / denom).ln_1p();
        }
        interference_plus_noise.push(denom);
        received_signal.push(signal);
    }
    CellSnapshot { interference_plus_noise, received_signal, total_log_throughput: total_log }
}

/// Cell utility U(P): Σ over active stations with clients of
/// w^m·ln(B·R_m) minus the energy cost Σ ζ_m·P_{m,z}/|Q| over all active
/// stations. −∞ when some populated cell has zero total rate.
pub fn utility(
    model: &CellModel,
    tensor: &GainTensor,
    stations: &[BaseStation],
    alloc: &PowerAllocation,
    grid: &ResourceBlockGrid,
) -> f64 {
    let terms = par::map_range(stations.len(), |m| {
        if !stations[m].is_active() {
            return 0.0;
        }
        let cost = stations[m].energy_price * alloc.station_mean_power_w(m, grid);
        if model.sum_weight[m] <= 0.0 {
            return -cost;
        }
        let snap = snapshot_for(m, model, tensor, stations, alloc, grid);
        let rate = grid.block_bandwidth_hz * snap.total_log_throughput;
        if rate <= 0.0 {
            return f64::NEG_INFINITY;
        }
        model.sum_weight[m] * rate.ln() - cost
    });
    terms.into_iter().sum()
}

/// Keeps the active neighbors whose strongest chunk gain into cell m is at or
/// above the threshold; pruned cells contribute nothing to m's gradient.
pub fn prune_neighbors(
    m: usize,
    tensor: &GainTensor,
    stations: &[BaseStation],
    threshold: f64,
) -> Vec<usize> {
    (0..stations.len())
        .filter(|&o| o != m && stations[o].is_active())
        .filter(|&o| {
            let strongest = (0..tensor.num_chunks())
                .map(|ch| tensor.station_gain(o, m, ch))
                .fold(0.0f64, f64::max);
            strongest >= threshold
        })
        .collect()
}

/// The closed-form utility gradient for station m, per block:
/// own-cell gain term + interference externality on each unpruned neighbor −
/// ζ_m/|Q|. `snapshots[o]` must hold every active populated station's
/// snapshot under the same allocation.
pub fn grad(
    m: usize,
    model: &CellModel,
    tensor: &GainTensor,
    stations: &[BaseStation],
    grid: &ResourceBlockGrid,
    snapshots: &[Option<CellSnapshot>],
    neighbors: &[usize],
) -> Vec<f64> {
    let nz = grid.num_blocks();
    let price_term = stations[m].energy_price / grid.num_slots as f64;
    let own = snapshots[m].as_ref().expect("gradient station must have a snapshot");
    let w_m = model.sum_weight[m];
    let mut g = vec![0.0; nz];
    for z in 0..nz {
        let chunk = grid.chunk_of(z);
        let mut val = 0.0;
        // Own-cell term: w^m/R_m · G_{m,m,z} / (I_m,z + S_m,z).
        if own.total_log_throughput > 0.0 {
            let full = own.interference_plus_noise[z] + own.received_signal[z];
            if full > DENOM_GUARD_W {
                val += w_m / own.total_log_throughput * model.own_gain[m][chunk] / full;
            }
        }
        // Externality on each neighbor o: w^o/R_o · G_{o,m,z} · (1/(I+S) − 1/I).
        for &o in neighbors {
            let snap = match &snapshots[o] {
                Some(s) => s,
                None => continue,
            };
            if snap.total_log_throughput <= 0.0 {
                continue;
            }
            let i_o = snap.interference_plus_noise[z];
            let full = i_o + snap.received_signal[z];
            if i_o <= DENOM_GUARD_W || full <= DENOM_GUARD_W {
                continue;
            }
            let g_om = tensor.station_gain(o, m, chunk);
            val += model.sum_weight[o] / snap.total_log_throughput * g_om * (1.0 / full - 1.0 / i_o);
        }
        g[z] = val - price_term;
    }
    g
}

/// The projected update: tentative P′ = [P + α·g]⁺ per block, then any slot
/// whose sum exceeds the budget is rescaled onto it. Always feasible.
pub fn power_update(current: &[f64], grads: &[f64], alpha: f64, budget_w: f64, grid: &ResourceBlockGrid) -> Vec<f64> {
    let mut next: Vec<f64> = current.iter().zip(grads).map(|(&p, &g)| (p + alpha * g).max(0.0)).collect();
    for q in 0..grid.num_slots {
        let mut sum = 0.0;
        for f in 0..grid.num_freq_chunks {
            sum += next[f * grid.num_slots + q];
        }
        if sum > budget_w {
            let scale = budget_w / sum;
            for f in 0..grid.num_freq_chunks {
                next[f * grid.num_slots + q] *= scale;
            }
        }
    }
    next
}

/// Equal-power allocation: every active station spreads its budget uniformly,
/// W_m/|F| per block; sleeping stations get zero rows.
pub fn equal_power(stations: &[BaseStation], grid: &ResourceBlockGrid) -> PowerAllocation {
    let mut alloc = PowerAllocation::zeros(stations.len(), grid.num_blocks());
    for st in stations {
        if st.is_active() {
            let per_block = st.power_budget_w / grid.num_freq_chunks as f64;
            alloc.row_mut(st.id).fill(per_block);
        }
    }
    alloc
}

/// Result of one controller invocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Whether the joint step was applied.
    pub moved: bool,
    pub utility_before: f64,
    pub utility_after: f64,
    /// Utility evaluations spent in the line search.
    pub evals: u32,
    /// Reports exchanged (one per unpruned neighbor relation).
    pub reports: usize,
    /// Scalar values carried by those reports.
    pub values: usize,
}

/// The periodic power controller: holds the adapted line-search step between
/// invocations.
#[derive(Debug, Clone)]
pub struct PowerController {
    pub params: PowerCtlParams,
    alpha: f64,
}

const ALPHA_MIN: f64 = 1e-12;
const ALPHA_MAX: f64 = 1e12;

impl PowerController {
    pub fn new(params: PowerCtlParams) -> Self {
        let alpha = params.alpha_init;
        PowerController { params, alpha }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// One synchronized update round: gradients for every active populated
    /// station from a common snapshot, a two-sided ladder search for the step
    /// α on the joint candidate, then the gated accept. Mutates `alloc` only
    /// on acceptance.
    pub fn update(
        &mut self,
        model: &CellModel,
        tensor: &GainTensor,
        stations: &[BaseStation],
        alloc: &mut PowerAllocation,
        grid: &ResourceBlockGrid,
    ) -> StepOutcome {
        let nm = stations.len();
        let movers: Vec<usize> =
            (0..nm).filter(|&m| stations[m].is_active() && model.sum_weight[m] > 0.0).collect();
        let u0 = utility(model, tensor, stations, alloc, grid);
        let mut outcome = StepOutcome {
            moved: false,
            utility_before: u0,
            utility_after: u0,
            evals: 0,
            reports: 0,
            values: 0,
        };
        if movers.is_empty() || !u0.is_finite() {
            return outcome;
        }

        let snapshots: Vec<Option<CellSnapshot>> = par::map_range(nm, |m| {
            (stations[m].is_active() && model.sum_weight[m] > 0.0)
                .then(|| snapshot_for(m, model, tensor, stations, alloc, grid))
        });
        let neighbor_sets: Vec<Vec<usize>> = movers
            .iter()
            .map(|&m| {
                let mut set = prune_neighbors(m, tensor, stations, self.params.neighbor_gain_threshold);
                set.retain(|&o| snapshots[o].is_some());
                set
            })
            .collect();
        for set in &neighbor_sets {
            outcome.reports += set.len();
            outcome.values += set.len() * (2 + 3 * grid.num_blocks());
        }
        let pairs: Vec<(usize, &[usize])> =
            movers.iter().copied().zip(neighbor_sets.iter().map(|s| s.as_slice())).collect();
        let grads: Vec<Vec<f64>> =
            par::map_slice(&pairs, |&(m, set)| grad(m, model, tensor, stations, grid, &snapshots, set));

        // Joint candidate at step a, and its utility.
        let mut evals = 0u32;
        let mut eval_at = |a: f64| -> f64 {
            let mut cand = alloc.clone();
            for (k, &m) in movers.iter().enumerate() {
                let row = power_update(alloc.row(m), &grads[k], a, stations[m].power_budget_w, grid);
                cand.set_row(m, &row);
            }
            evals += 1;
            utility(model, tensor, stations, &cand, grid)
        };

        // Two-sided ladder: climb α while the candidate improves, in whichever
        // direction helps, and keep the peak.
        let mut a = self.alpha.clamp(ALPHA_MIN, ALPHA_MAX);
        let mut u_a = eval_at(a);
        if a * 2.0 <= ALPHA_MAX && eval_at(a * 2.0) > u_a {
            a *= 2.0;
            u_a = eval_at(a);
            while a * 2.0 <= ALPHA_MAX {
                let next = eval_at(a * 2.0);
                if next > u_a {
                    a *= 2.0;
                    u_a = next;
                } else {
                    break;
                }
            }
        } else {
            while a * 0.5 >= ALPHA_MIN {
                let next = eval_at(a * 0.5);
                if next > u_a {
                    a *= 0.5;
                    u_a = next;
                } else {
                    break;
                }
            }
        }
        self.alpha = a;
        outcome.evals = evals;

        if u_a >= u0 + self.params.min_improvement && u_a.is_finite() {
            for (k, &m) in movers.iter().enumerate() {
                let row = power_update(alloc.row(m), &grads[k], a, stations[m].power_budget_w, grid);
                alloc.set_row(m, &row);
            }
            outcome.moved = true;
            outcome.utility_after = u_a;
        }
        outcome
    }
}

/// Builds the neighbor reports one station broadcasts (used for logging and
/// by the tests; the controller reads the same snapshot data in place).
pub fn build_reports(
    model: &CellModel,
    tensor: &GainTensor,
    stations: &[BaseStation],
    alloc: &PowerAllocation,
    grid: &ResourceBlockGrid,
    receiver: usize,
    neighbors: &[usize],
) -> Vec<NeighborReport> {
    neighbors
        .iter()
        .map(|&o| {
            let snap = snapshot_for(o, model, tensor, stations, alloc, grid);
            let gain_from_receiver =
                (0..grid.num_blocks()).map(|z| tensor.station_gain(o, receiver, grid.chunk_of(z))).collect();
            NeighborReport {
                from: o,
                sum_weight: model.sum_weight[o],
                gain_from_receiver,
                interference_plus_noise: snap.interference_plus_noise,
                received_signal: snap.received_signal,
                total_log_throughput: snap.total_log_throughput,
            }
        })
        .collect()
}
