//! Core domain types: the resource-block grid, stations, clients, and power
//! allocations, plus the power-budget validator shared by the whole codebase.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default macro-station transmit power budget per slot, watts.
pub const MACRO_POWER_BUDGET_W: f64 = 20.0;
/// Default macro-station operation power (active minus sleep draw), watts.
pub const MACRO_OPERATION_POWER_W: f64 = 55.0;
/// Default micro-station transmit power budget per slot, watts.
pub const MICRO_POWER_BUDGET_W: f64 = 6.3;
/// Default micro-station operation power, watts.
pub const MICRO_OPERATION_POWER_W: f64 = 17.0;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("chunk index {f} out of range (|F| = {num_chunks})")]
    ChunkOutOfRange { f: usize, num_chunks: usize },
    #[error("slot index {q} out of range (|Q| = {num_slots})")]
    SlotOutOfRange { q: usize, num_slots: usize },
    #[error("block index {z} out of range ({num_blocks} blocks)")]
    BlockOutOfRange { z: usize, num_blocks: usize },
}

/// The OFDMA time–frequency grid.
///
/// A block is one frequency chunk (12 subcarriers, 180 kHz) during one slot;
/// a frame holds `num_slots` slots. Blocks are indexed `z = f·|Q| + q` so a
/// chunk's blocks are contiguous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceBlockGrid {
    pub num_freq_chunks: usize,
    pub num_slots: usize,
    pub block_bandwidth_hz: f64,
    pub slot_duration_s: f64,
    pub frame_duration_s: f64,
}

impl Default for ResourceBlockGrid {
    fn default() -> Self {
        ResourceBlockGrid {
            num_freq_chunks: 50,
            num_slots: 20,
            block_bandwidth_hz: 180e3,
            slot_duration_s: 0.5e-3,
            frame_duration_s: 10e-3,
        }
    }
}

impl ResourceBlockGrid {
    pub fn num_blocks(&self) -> usize {
        self.num_freq_chunks * self.num_slots
    }

    /// Maps a (chunk, slot) pair to its block index.
    pub fn block_index(&self, f: usize, q: usize) -> Result<usize, GridError> {
        if f >= self.num_freq_chunks {
            return Err(GridError::ChunkOutOfRange { f, num_chunks: self.num_freq_chunks });
        }
        if q >= self.num_slots {
            return Err(GridError::SlotOutOfRange { q, num_slots: self.num_slots });
        }
        Ok(f * self.num_slots + q)
    }

    /// Inverse of [`block_index`](Self::block_index).
    pub fn block_pair(&self, z: usize) -> Result<(usize, usize), GridError> {
        if z >= self.num_blocks() {
            return Err(GridError::BlockOutOfRange { z, num_blocks: self.num_blocks() });
        }
        Ok((z / self.num_slots, z % self.num_slots))
    }

    /// Frequency chunk of block `z` (no bounds check; callers index valid blocks).
    #[inline]
    pub fn chunk_of(&self, z: usize) -> usize {
        z / self.num_slots
    }

    /// Time slot of block `z`.
    #[inline]
    pub fn slot_of(&self, z: usize) -> usize {
        z % self.num_slots
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationKind {
    Macro,
    Micro,
}

impl StationKind {
    pub fn default_power_budget_w(self) -> f64 {
        match self {
            StationKind::Macro => MACRO_POWER_BUDGET_W,
            StationKind::Micro => MICRO_POWER_BUDGET_W,
        }
    }

    pub fn default_operation_power_w(self) -> f64 {
        match self {
            StationKind::Macro => MACRO_OPERATION_POWER_W,
            StationKind::Micro => MICRO_OPERATION_POWER_W,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationMode {
    Active,
    Sleep,
}

/// A base station. Positions are planar meters; all power figures are watts.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseStation {
    pub id: usize,
    pub kind: StationKind,
    pub position: [f64; 2],
    /// Per-slot transmit budget W_m: the sum of block powers in any one slot
    /// may not exceed this.
    pub power_budget_w: f64,
    /// Operation power C_m: the active-vs-sleep draw difference.
    pub operation_power_w: f64,
    /// Energy price ζ_m applied to both transmit and operation power.
    pub energy_price: f64,
    pub mode: StationMode,
}

impl BaseStation {
    pub fn new(id: usize, kind: StationKind, position: [f64; 2]) -> Self {
        BaseStation {
            id,
            kind,
            position,
            power_budget_w: kind.default_power_budget_w(),
            operation_power_w: kind.default_operation_power_w(),
            energy_price: 0.0,
            mode: StationMode::Active,
        }
    }

    pub fn is_active(&self) -> bool {
        self.mode == StationMode::Active
    }
}

/// A client. `noise_w[z]` is the receiver noise on block `z`, sampled once at
/// scenario construction and held fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct Client {
    pub id: usize,
    pub position: [f64; 2],
    pub weight: f64,
    pub association: Option<usize>,
    pub noise_w: Vec<f64>,
}

/// Euclidean distance between two planar points in meters.
pub fn distance_m(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Transmit power P_{m,z} per station per block, stored station-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    num_stations: usize,
    num_blocks: usize,
    p: Vec<f64>,
}

impl PowerAllocation {
    pub fn zeros(num_stations: usize, num_blocks: usize) -> Self {
        PowerAllocation { num_stations, num_blocks, p: vec![0.0; num_stations * num_blocks] }
    }

    pub fn num_stations(&self) -> usize {
        self.num_stations
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    #[inline]
    pub fn get(&self, station: usize, z: usize) -> f64 {
        self.p[station * self.num_blocks + z]
    }

    #[inline]
    pub fn set(&mut self, station: usize, z: usize, value: f64) {
        self.p[station * self.num_blocks + z] = value;
    }

    #[inline]
    pub fn row(&self, station: usize) -> &[f64] {
        &self.p[station * self.num_blocks..(station + 1) * self.num_blocks]
    }

    pub fn row_mut(&mut self, station: usize) -> &mut [f64] {
        &mut self.p[station * self.num_blocks..(station + 1) * self.num_blocks]
    }

    pub fn set_row(&mut self, station: usize, values: &[f64]) {
        self.row_mut(station).copy_from_slice(values);
    }

    pub fn clear_row(&mut self, station: usize) {
        self.row_mut(station).fill(0.0);
    }

    /// Total transmit energy rate of one station: Σ_z P_{m,z} / |Q| watts
    /// (each block transmits for 1/|Q| of the time).
    pub fn station_mean_power_w(&self, station: usize, grid: &ResourceBlockGrid) -> f64 {
        self.row(station).iter().sum::<f64>() / grid.num_slots as f64
    }
}

/// One violated power constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum PowerViolation {
    /// P_{m,z} < 0.
    NegativeEntry { station: usize, block: usize, value: f64 },
    /// Σ_f P over one slot exceeds the station budget.
    BudgetExceeded { station: usize, slot: usize, sum: f64, budget: f64 },
}

/// Result of [`validate_power`]: per-(station, slot) budget slacks plus the
/// list of violations (empty iff the allocation is feasible).
#[derive(Debug, Clone)]
pub struct PowerCheck {
    /// `slacks[m][q]` = Σ_f P_{m,(f,q)} − W_m; feasible rows have slack ≤ 0.
    pub slacks: Vec<Vec<f64>>,
    pub violations: Vec<PowerViolation>,
}

impl PowerCheck {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Absolute tolerance on budget slacks, covering the rounding of a rescaled
/// slot row summed back up (worst case ~1e-13 at these budgets).
pub const BUDGET_SLACK_TOL_W: f64 = 1e-9;

/// Checks an allocation against nonnegativity and the per-slot budgets of
/// every station (sleeping stations must hold all-zero rows, which pass
/// trivially).
pub fn validate_power(
    alloc: &PowerAllocation,
    stations: &[BaseStation],
    grid: &ResourceBlockGrid,
) -> PowerCheck {
    assert_eq!(alloc.num_stations(), stations.len(), "allocation/station count mismatch");
    assert_eq!(alloc.num_blocks(), grid.num_blocks(), "allocation/grid size mismatch");
    let mut slacks = Vec::with_capacity(stations.len());
    let mut violations = Vec::new();
    for st in stations {
        let row = alloc.row(st.id);
        let mut slot_sums = vec![0.0; grid.num_slots];
        for (z, &p) in row.iter().enumerate() {
            if p < 0.0 {
                violations.push(PowerViolation::NegativeEntry { station: st.id, block: z, value: p });
            }
            slot_sums[grid.slot_of(z)] += p;
        }
        let mut station_slacks = Vec::with_capacity(grid.num_slots);
        for (q, &sum) in slot_sums.iter().enumerate() {
            let slack = sum - st.power_budget_w;
            if slack > BUDGET_SLACK_TOL_W {
                violations.push(PowerViolation::BudgetExceeded {
                    station: st.id,
                    slot: q,
                    sum,
                    budget: st.power_budget_w,
                });
            }
            station_slacks.push(slack);
        }
        slacks.push(station_slacks);
    }
    PowerCheck { slacks, violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_index_first_block() {
        let grid = ResourceBlockGrid::default();
        assert_eq!(grid.block_index(0, 0).unwrap(), 0);
    }

    #[test]
    fn block_index_distinct_neighbors() {
        let grid = ResourceBlockGrid::default();
        assert_ne!(grid.block_index(0, 1).unwrap(), grid.block_index(1, 0).unwrap());
    }

    #[test]
    fn block_index_full_grid_bijection() {
        let grid = ResourceBlockGrid::default();
        assert_eq!(grid.num_blocks(), 1000);
        let mut seen = vec![false; grid.num_blocks()];
        let mut max_z = 0;
        for f in 0..grid.num_freq_chunks {
            for q in 0..grid.num_slots {
                let z = grid.block_index(f, q).unwrap();
                assert!(!seen[z], "index {z} repeated");
                seen[z] = true;
                max_z = max_z.max(z);
                assert_eq!(grid.block_pair(z).unwrap(), (f, q));
                assert_eq!(grid.chunk_of(z), f);
                assert_eq!(grid.slot_of(z), q);
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(max_z, 999);
        assert_eq!(grid.block_index(49, 19).unwrap(), 999);
    }

    #[test]
    fn block_index_rejects_out_of_range() {
        let grid = ResourceBlockGrid::default();
        assert!(grid.block_index(50, 0).is_err());
        assert!(grid.block_index(0, 20).is_err());
        assert!(grid.block_pair(1000).is_err());
    }

    fn macro_station(id: usize) -> BaseStation {
        BaseStation::new(id, StationKind::Macro, [0.0, 0.0])
    }

    #[test]
    fn validate_power_all_zero_ok() {
        let grid = ResourceBlockGrid::default();
        let alloc = PowerAllocation::zeros(1, grid.num_blocks());
        let check = validate_power(&alloc, &[macro_station(0)], &grid);
        assert!(check.is_ok());
        assert!(check.slacks[0].iter().all(|&s| s == -MACRO_POWER_BUDGET_W));
    }

    #[test]
    fn validate_power_uniform_macro_exact_budget() {
        // 50 chunks × 20/50 W = exactly the 20 W budget in every slot.
        let grid = ResourceBlockGrid::default();
        let mut alloc = PowerAllocation::zeros(1, grid.num_blocks());
        let per_block = MACRO_POWER_BUDGET_W / grid.num_freq_chunks as f64;
        for z in 0..grid.num_blocks() {
            alloc.set(0, z, per_block);
        }
        let check = validate_power(&alloc, &[macro_station(0)], &grid);
        assert!(check.is_ok());
        for &slack in &check.slacks[0] {
            assert!(slack.abs() < 1e-12, "slack {slack} not ~0");
        }
    }

    #[test]
    fn validate_power_flags_negative_entry() {
        let grid = ResourceBlockGrid::default();
        let mut alloc = PowerAllocation::zeros(1, grid.num_blocks());
        alloc.set(0, 123, -0.1);
        let check = validate_power(&alloc, &[macro_station(0)], &grid);
        assert_eq!(
            check.violations,
            vec![PowerViolation::NegativeEntry { station: 0, block: 123, value: -0.1 }]
        );
    }

    #[test]
    fn validate_power_flags_budget_violation_with_indices() {
        let grid = ResourceBlockGrid::default();
        let mut alloc = PowerAllocation::zeros(1, grid.num_blocks());
        // Overload slot 3 only.
        for f in 0..grid.num_freq_chunks {
            let z = grid.block_index(f, 3).unwrap();
            alloc.set(0, z, 0.5);
        }
        let check = validate_power(&alloc, &[macro_station(0)], &grid);
        assert_eq!(check.violations.len(), 1);
        match &check.violations[0] {
            PowerViolation::BudgetExceeded { station, slot, sum, budget } => {
                assert_eq!((*station, *slot), (0, 3));
                assert!((sum - 25.0).abs() < 1e-9);
                assert_eq!(*budget, MACRO_POWER_BUDGET_W);
            }
            other => panic!("unexpected violation {other:?}"),
        }
    }

    #[test]
    fn distance_is_euclidean() {
        assert_eq!(distance_m([0.0, 0.0], [3.0, 4.0]), 5.0);
    }
}
