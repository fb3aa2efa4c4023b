//! The four experiment topologies.
//!
//! Geometry is deterministic in the master seed: fixed grids are laid out
//! directly, and the uniform placements draw from a dedicated keyed stream,
//! so the same seed always yields the same network.

use crate::netmodel::{BaseStation, Client, ResourceBlockGrid, StationKind};
use crate::rng::{self, tag};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default inter-station distance for the power-pair topology.
pub const DEFAULT_PAIR_DISTANCE_M: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioId {
    /// One macro station, 25 clients on a 5×5 grid with 100 m spacing.
    Grid25,
    /// Two macro stations at a configurable distance, two clients each at
    /// 50 m from their station.
    PowerPair,
    /// Two macro stations 500 m apart, four clients uniform between them.
    AssocPair,
    /// 3000 m × 3000 m area: 9 macros on a 3×3 grid, 16 micros uniform in
    /// the upper-right 2000 m square, 81 clients uniform, weight 2 in the
    /// lower-left 1000 m square.
    Large,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown scenario '{0}' (expected grid25, power-pair, assoc-pair, or large)")]
pub struct UnknownScenario(pub String);

impl std::str::FromStr for ScenarioId {
    type Err = UnknownScenario;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grid25" => Ok(ScenarioId::Grid25),
            "power-pair" => Ok(ScenarioId::PowerPair),
            "assoc-pair" => Ok(ScenarioId::AssocPair),
            "large" => Ok(ScenarioId::Large),
            other => Err(UnknownScenario(other.to_string())),
        }
    }
}

impl std::fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ScenarioId::Grid25 => "grid25",
            ScenarioId::PowerPair => "power-pair",
            ScenarioId::AssocPair => "assoc-pair",
            ScenarioId::Large => "large",
        };
        f.write_str(s)
    }
}

/// A built topology: stations (all initially active) and clients (initially
/// unassociated; the engine assigns them).
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: ScenarioId,
    pub stations: Vec<BaseStation>,
    pub clients: Vec<Client>,
}

fn client(id: usize, position: [f64; 2], weight: f64, seed: u64, grid: &ResourceBlockGrid) -> Client {
    Client {
        id,
        position,
        weight,
        association: None,
        noise_w: crate::channel::sample_noise_row(seed, id, grid.num_blocks()),
    }
}

/// Builds a topology with the power-pair at its default distance; use
/// [`build_power_pair`] to sweep that distance.
pub fn build_scenario(id: ScenarioId, seed: u64, grid: &ResourceBlockGrid) -> Scenario {
    match id {
        ScenarioId::Grid25 => build_grid25(seed, grid),
        ScenarioId::PowerPair => build_power_pair(seed, DEFAULT_PAIR_DISTANCE_M, grid),
        ScenarioId::AssocPair => build_assoc_pair(seed, grid),
        ScenarioId::Large => build_large(seed, grid),
    }
}

fn build_grid25(seed: u64, grid: &ResourceBlockGrid) -> Scenario {
    // The station sits east of the client grid; with the grid centered on the
    // origin this leaves a 500–900 m spread of link distances, enough rate
    // disparity for proportional fairness to show its gain over round-robin.
    let stations = vec![BaseStation::new(0, StationKind::Macro, [700.0, 0.0])];
    let mut clients = Vec::with_capacity(25);
    for row in 0..5 {
        for col in 0..5 {
            let id = row * 5 + col;
            let pos = [-200.0 + 100.0 * col as f64, -200.0 + 100.0 * row as f64];
            clients.push(client(id, pos, 1.0, seed, grid));
        }
    }
    Scenario { id: ScenarioId::Grid25, stations, clients }
}

/// Two macros on the x-axis separated by `distance_m`, each serving two
/// clients placed 50 m above and below it.
pub fn build_power_pair(seed: u64, distance_m: f64, grid: &ResourceBlockGrid) -> Scenario {
    let half = distance_m / 2.0;
    let stations = vec![
        BaseStation::new(0, StationKind::Macro, [-half, 0.0]),
        BaseStation::new(1, StationKind::Macro, [half, 0.0]),
    ];
    let clients = vec![
        client(0, [-half, 50.0], 1.0, seed, grid),
        client(1, [-half, -50.0], 1.0, seed, grid),
        client(2, [half, 50.0], 1.0, seed, grid),
        client(3, [half, -50.0], 1.0, seed, grid),
    ];
    Scenario { id: ScenarioId::PowerPair, stations, clients }
}

fn build_assoc_pair(seed: u64, grid: &ResourceBlockGrid) -> Scenario {
    let stations = vec![
        BaseStation::new(0, StationKind::Macro, [0.0, 0.0]),
        BaseStation::new(1, StationKind::Macro, [500.0, 0.0]),
    ];
    let mut rng = rng::stream(seed, tag::PLACEMENT, &[ScenarioId::AssocPair as u64]);
    let clients = (0..4)
        .map(|i| {
            let pos = [rng.gen_range(0.0..500.0), rng.gen_range(-100.0..100.0)];
            client(i, pos, 1.0, seed, grid)
        })
        .collect();
    Scenario { id: ScenarioId::AssocPair, stations, clients }
}

fn build_large(seed: u64, grid: &ResourceBlockGrid) -> Scenario {
    let mut stations = Vec::with_capacity(25);
    for a in 0..3 {
        for b in 0..3 {
            let id = a * 3 + b;
            let pos = [500.0 + 1000.0 * b as f64, 500.0 + 1000.0 * a as f64];
            stations.push(BaseStation::new(id, StationKind::Macro, pos));
        }
    }
    let mut rng = rng::stream(seed, tag::PLACEMENT, &[ScenarioId::Large as u64]);
    for k in 0..16 {
        let pos = [rng.gen_range(1000.0..3000.0), rng.gen_range(1000.0..3000.0)];
        stations.push(BaseStation::new(9 + k, StationKind::Micro, pos));
    }
    let clients = (0..81)
        .map(|i| {
            let pos = [rng.gen_range(0.0..3000.0), rng.gen_range(0.0..3000.0)];
            let weight = if pos[0] <= 1000.0 && pos[1] <= 1000.0 { 2.0 } else { 1.0 };
            client(i, pos, weight, seed, grid)
        })
        .collect();
    Scenario { id: ScenarioId::Large, stations, clients }
}
