//! The protocol loop: per-frame scheduling, periodic power control, and
//! infrequent association/mode epochs, in three nested timescales.
//!
//! Every association boundary runs, in order: station advertisements →
//! client estimates and station choices → simultaneous sleep decisions →
//! association (with fallback when a chosen station just slept) → beacons
//! and simultaneous wake decisions → a metrics row over the closed window.
//! Power-control rounds run at their own period, after any association work
//! at a shared boundary. Everything is deterministic in the master seed.

use crate::association::{
    approximate_estimate, build_advertisement, candidate_set, choose_station, exact_estimate,
    AssociationReport, CellAdvertisement, CANDIDATE_THRESHOLD_NATS, EXACT_SIMULATOR_FRAMES,
};
use crate::channel::{compute_full_rates, compute_serving_rates, ChannelParams, GainTensor, LinkRateTable};
use crate::metrics::{evaluate, MetricsRecord};
use crate::netmodel::{validate_power, BaseStation, Client, PowerAllocation, ResourceBlockGrid, StationMode};
use crate::powerctl::{compute_cell_model, equal_power, CellModel, PowerController, PowerCtlParams};
use crate::scenario::{build_power_pair, build_scenario, Scenario, ScenarioId, DEFAULT_PAIR_DISTANCE_M};
use crate::scheduler::ScheduleState;
use crate::sleepwake::{
    beacon_solo_rates, sleep_decision, wake_decision, wakeup_estimator, WakeReport, BEACON_PERIOD_EPOCHS,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulerPolicy {
    /// Online PF on static (shadowing-only) rates.
    PfSlow,
    /// Online PF on instantaneous (fast-fading) rates.
    PfFast,
    /// Round-robin, whole frames, static rates.
    Rr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerPolicy {
    /// Distributed gradient updates every power period.
    Gradient,
    /// Hold the equal-power allocation.
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssociationPolicy {
    /// Selfish estimates + sleep/wake management.
    Proposed,
    /// Nearest active station, nothing ever sleeps.
    Default,
    /// Count-greedy association with a weight threshold for sleeping.
    SonZhou,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Approximate,
    Exact,
}

macro_rules! parse_enum {
    ($ty:ty { $($text:literal => $variant:path),+ $(,)? }) => {
        impl std::str::FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($variant),)+
                    other => Err(format!(
                        concat!("unknown ", stringify!($ty), " '{}' (expected one of: ", $($text, " "),+, ")"),
                        other
                    )),
                }
            }
        }

        impl std::fmt::Display for $ty {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                match self {
                    $($variant => f.write_str($text),)+
                }
            }
        }
    };
}

parse_enum!(SchedulerPolicy { "pf-slow" => SchedulerPolicy::PfSlow, "pf-fast" => SchedulerPolicy::PfFast, "rr" => SchedulerPolicy::Rr });
parse_enum!(PowerPolicy { "gradient" => PowerPolicy::Gradient, "equal" => PowerPolicy::Equal });
parse_enum!(AssociationPolicy { "proposed" => AssociationPolicy::Proposed, "default" => AssociationPolicy::Default, "son-zhou" => AssociationPolicy::SonZhou });
parse_enum!(EstimatorKind { "ae" => EstimatorKind::Approximate, "es" => EstimatorKind::Exact });

/// Full run configuration. TOML-serializable; unspecified fields take the
/// defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub scenario: ScenarioId,
    pub seed: u64,
    /// Frames to simulate.
    pub horizon_frames: u64,
    /// Frames between power-control rounds.
    pub power_period: u64,
    /// Frames between association/mode epochs; must be a multiple of the
    /// power period.
    pub assoc_period: u64,
    pub estimator: EstimatorKind,
    pub scheduler: SchedulerPolicy,
    pub power: PowerPolicy,
    pub association: AssociationPolicy,
    /// Global energy price ζ applied to every station…
    pub energy_price: f64,
    /// …unless a per-station list is given.
    pub station_prices: Option<Vec<f64>>,
    /// Minimum total associated weight below which Son-Zhou sleeps a station.
    pub son_zhou_threshold: f64,
    /// Inter-station distance for the power-pair scenario.
    pub power_pair_distance_m: f64,
    /// Beacons every this many association epochs.
    pub beacon_period_epochs: u64,
    pub powerctl: PowerCtlParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            scenario: ScenarioId::Grid25,
            seed: 1,
            horizon_frames: 2000,
            power_period: 10,
            assoc_period: 100,
            estimator: EstimatorKind::Approximate,
            scheduler: SchedulerPolicy::PfSlow,
            power: PowerPolicy::Gradient,
            association: AssociationPolicy::Proposed,
            energy_price: 0.0,
            station_prices: None,
            son_zhou_threshold: 2.0,
            power_pair_distance_m: DEFAULT_PAIR_DISTANCE_M,
            beacon_period_epochs: BEACON_PERIOD_EPOCHS,
            powerctl: PowerCtlParams::default(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("power period must be at least one frame")]
    PowerPeriodZero,
    #[error("association period {assoc} is not a positive multiple of the power period {power}")]
    PeriodMisaligned { assoc: u64, power: u64 },
    #[error("{got} station prices supplied for {want} stations")]
    PriceCount { got: usize, want: usize },
}

impl SimConfig {
    /// Timescale ordering: frames ⊂ power periods ⊂ association epochs.
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.power_period == 0 {
            return Err(EngineError::PowerPeriodZero);
        }
        if self.assoc_period < self.power_period || self.assoc_period % self.power_period != 0 {
            return Err(EngineError::PeriodMisaligned {
                assoc: self.assoc_period,
                power: self.power_period,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Mode,
    Association,
}

/// One logged state change.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub epoch: u64,
    pub kind: EventKind,
    /// Station id for mode events, client id for association events.
    pub subject: usize,
    pub from: String,
    pub to: String,
    /// Decision margin for mode events; 0 for association moves.
    pub margin: f64,
}

pub const EVENTS_CSV_HEADER: &str = "epoch,kind,subject,from,to,margin";

impl EventRecord {
    pub fn csv_row(&self) -> String {
        let kind = match self.kind {
            EventKind::Mode => "mode",
            EventKind::Association => "assoc",
        };
        format!("{},{},{},{},{},{}", self.epoch, kind, self.subject, self.from, self.to, self.margin)
    }
}

/// Everything a finished run hands back.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// One row per association epoch.
    pub metrics: Vec<MetricsRecord>,
    pub events: Vec<EventRecord>,
    /// Final station states (modes, prices).
    pub stations: Vec<BaseStation>,
    /// Final client states (associations).
    pub clients: Vec<Client>,
    /// Final power allocation.
    pub alloc: PowerAllocation,
    /// Client throughputs (nats/s) over the last reported window.
    pub window_rates_nats: Vec<f64>,
    /// Power-feasibility violations observed after updates (always 0 unless
    /// something is broken; asserted by the test suite).
    pub power_violations: usize,
}

impl RunOutput {
    pub fn final_metrics(&self) -> Option<&MetricsRecord> {
        self.metrics.last()
    }

    pub fn metrics_csv(&self) -> String {
        metrics_csv(&self.metrics)
    }

    pub fn events_csv(&self) -> String {
        let mut s = String::from(EVENTS_CSV_HEADER);
        s.push('\n');
        for e in &self.events {
            s.push_str(&e.csv_row());
            s.push('\n');
        }
        s
    }
}

/// Renders metrics records as a CSV document.
pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut s = String::from(crate::metrics::CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Nearest active station per client (ties to the lowest id); `None` when
/// nothing is active.
pub fn default_associate(clients: &[Client], stations: &[BaseStation]) -> Vec<Option<usize>> {
    clients
        .iter()
        .map(|c| {
            let mut best: Option<(usize, f64)> = None;
            for st in stations.iter().filter(|s| s.is_active()) {
                let d = crate::netmodel::distance_m(c.position, st.position);
                if best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((st.id, d));
                }
            }
            best.map(|(m, _)| m)
        })
        .collect()
}

/// Count-greedy baseline association. Every client scores each active
/// station by (its rate there) × (prospective cell population) / (operation
/// power) and picks the argmax; stations whose total associated weight falls
/// below the threshold sleep, and their clients repeat the choice among the
/// remaining stations. Population counts come from the incoming associations
/// (seeded by the engine's initial nearest-station assignment), and the
/// procedure iterates to a fixed point or 10 rounds. `rate_totals[i][m]` is
/// client i's whole-band rate at station m. Returns the associations and the
/// stations put to sleep with their decision margins (weight − threshold).
pub fn son_zhou_associate(
    clients: &[Client],
    stations: &[BaseStation],
    rate_totals: &[Vec<f64>],
    threshold: f64,
) -> (Vec<Option<usize>>, Vec<(usize, f64)>) {
    let nm = stations.len();
    let n = clients.len();
    let mut active: Vec<bool> = stations.iter().map(|s| s.is_active()).collect();
    let mut assoc: Vec<Option<usize>> =
        clients.iter().map(|c| c.association.filter(|&m| active[m])).collect();
    let mut sleeps: Vec<(usize, f64)> = Vec::new();

    let pick = |i: usize, assoc: &[Option<usize>], counts: &[usize], active: &[bool]| -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for m in 0..nm {
            if !active[m] || rate_totals[i][m] <= 0.0 {
                continue;
            }
            let others = counts[m] - usize::from(assoc[i] == Some(m));
            let score = rate_totals[i][m] * (others + 1) as f64 / stations[m].operation_power_w;
            if best.map_or(true, |(_, bs)| score > bs) {
                best = Some((m, score));
            }
        }
        best.map(|(m, _)| m)
    };
    let tally = |assoc: &[Option<usize>]| -> (Vec<usize>, Vec<f64>) {
        let mut counts = vec![0usize; nm];
        let mut weights = vec![0.0; nm];
        for (i, a) in assoc.iter().enumerate() {
            if let Some(m) = a {
                counts[*m] += 1;
                weights[*m] += clients[i].weight;
            }
        }
        (counts, weights)
    };

    for _ in 0..10 {
        let (counts, _) = tally(&assoc);
        let new_assoc: Vec<Option<usize>> = (0..n).map(|i| pick(i, &assoc, &counts, &active)).collect();

        let (_, weights) = tally(&new_assoc);
        let below: Vec<usize> =
            (0..nm).filter(|&m| active[m] && weights[m] < threshold).collect();
        let num_active = active.iter().filter(|&&a| a).count();
        let mut slept_now = Vec::new();
        if below.len() == num_active && num_active > 0 {
            // Coverage guard: keep the best-loaded station on.
            let keep = (0..nm)
                .filter(|&m| active[m])
                .max_by(|&a, &b| weights[a].partial_cmp(&weights[b]).unwrap().then(b.cmp(&a)))
                .unwrap();
            slept_now.extend(below.into_iter().filter(|&m| m != keep));
        } else {
            slept_now = below;
        }
        for &m in &slept_now {
            active[m] = false;
            sleeps.push((m, weights[m] - threshold));
        }

        let changed = new_assoc != assoc || !slept_now.is_empty();
        assoc = new_assoc;
        if !changed {
            break;
        }
    }

    // Clients still pointing at a station slept in the last round re-pick.
    let (counts, _) = tally(&assoc);
    for i in 0..n {
        if assoc[i].map_or(assoc[i].is_none(), |m| !active[m]) {
            assoc[i] = pick(i, &assoc, &counts, &active);
        }
    }
    (assoc, sleeps)
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    grid: ResourceBlockGrid,
    stations: Vec<BaseStation>,
    clients: Vec<Client>,
    tensor: GainTensor,
    alloc: PowerAllocation,
    controller: PowerController,
    model: CellModel,
    /// Static serving-link rate rows per client under the current allocation.
    serving: Vec<Vec<f64>>,
    /// Client ids per station, in id order.
    members: Vec<Vec<usize>>,
    states: Vec<Option<ScheduleState>>,
    window_sum: Vec<f64>,
    window_frames: u64,
    metrics: Vec<MetricsRecord>,
    events: Vec<EventRecord>,
    power_violations: usize,
    last_window: Vec<f64>,
}

/// Runs one configured simulation to completion.
pub fn run(cfg: &SimConfig) -> Result<RunOutput, EngineError> {
    cfg.validate()?;
    let grid = ResourceBlockGrid::default();
    let Scenario { stations: mut st, clients: mut cl, .. } = match cfg.scenario {
        ScenarioId::PowerPair => build_power_pair(cfg.seed, cfg.power_pair_distance_m, &grid),
        id => build_scenario(id, cfg.seed, &grid),
    };
    match &cfg.station_prices {
        Some(prices) => {
            if prices.len() != st.len() {
                return Err(EngineError::PriceCount { got: prices.len(), want: st.len() });
            }
            for (s, &p) in st.iter_mut().zip(prices) {
                s.energy_price = p;
            }
        }
        None => {
            for s in st.iter_mut() {
                s.energy_price = cfg.energy_price;
            }
        }
    }
    let initial = default_associate(&cl, &st);
    for (c, a) in cl.iter_mut().zip(&initial) {
        c.association = *a;
    }
    let tensor = GainTensor::build(
        cfg.seed,
        &ChannelParams::default(),
        &grid,
        &st,
        &cl,
        cfg.scheduler == SchedulerPolicy::PfFast,
    );
    let alloc = equal_power(&st, &grid);
    let model = compute_cell_model(None, &tensor, &grid, &st, &cl);
    let n = cl.len();
    let nm = st.len();
    let mut sim = Sim {
        cfg,
        grid,
        stations: st,
        clients: cl,
        tensor,
        alloc,
        controller: PowerController::new(cfg.powerctl),
        model,
        serving: Vec::new(),
        members: vec![Vec::new(); nm],
        states: (0..nm).map(|_| None).collect(),
        window_sum: vec![0.0; n],
        window_frames: 0,
        metrics: Vec::new(),
        events: Vec::new(),
        power_violations: 0,
        last_window: vec![0.0; n],
    };
    sim.refresh_serving();
    sim.rebuild_membership();

    for f in 0..cfg.horizon_frames {
        if f > 0 {
            sim.boundary(f);
        }
        sim.schedule_frame(f);
    }
    if cfg.horizon_frames > 0 {
        sim.boundary(cfg.horizon_frames);
    }

    Ok(RunOutput {
        metrics: sim.metrics,
        events: sim.events,
        stations: sim.stations,
        clients: sim.clients,
        alloc: sim.alloc,
        window_rates_nats: sim.last_window,
        power_violations: sim.power_violations,
    })
}

impl<'a> Sim<'a> {
    fn refresh_serving(&mut self) {
        self.serving =
            compute_serving_rates(&self.tensor, &self.grid, &self.stations, &self.clients, &self.alloc, None);
    }

    /// Rebuilds member lists from associations, restarting the scheduler
    /// state of every cell whose membership changed, and refreshes the cell
    /// model (means freeze for emptied stations).
    fn rebuild_membership(&mut self) {
        let nm = self.stations.len();
        let mut new_members = vec![Vec::new(); nm];
        for c in &self.clients {
            if let Some(m) = c.association {
                new_members[m].push(c.id);
            }
        }
        for m in 0..nm {
            if new_members[m] != self.members[m] {
                self.states[m] = if new_members[m].is_empty() {
                    None
                } else {
                    let rows: Vec<&[f64]> =
                        new_members[m].iter().map(|&i| self.serving[i].as_slice()).collect();
                    Some(ScheduleState::cold_start(&rows, self.grid.num_blocks()))
                };
            }
        }
        self.members = new_members;
        self.model =
            compute_cell_model(Some(&self.model), &self.tensor, &self.grid, &self.stations, &self.clients);
    }

    fn boundary(&mut self, t: u64) {
        if t % self.cfg.assoc_period == 0 {
            self.association_epoch(t);
        }
        if t < self.cfg.horizon_frames
            && t % self.cfg.power_period == 0
            && self.cfg.power == PowerPolicy::Gradient
        {
            self.power_round();
        }
    }

    fn power_round(&mut self) {
        let out =
            self.controller.update(&self.model, &self.tensor, &self.stations, &mut self.alloc, &self.grid);
        let check = validate_power(&self.alloc, &self.stations, &self.grid);
        if !check.is_ok() {
            self.power_violations += check.violations.len();
        }
        if out.moved {
            self.refresh_serving();
        }
    }

    fn schedule_frame(&mut self, frame: u64) {
        let fast = match self.cfg.scheduler {
            SchedulerPolicy::PfFast => Some(compute_serving_rates(
                &self.tensor,
                &self.grid,
                &self.stations,
                &self.clients,
                &self.alloc,
                Some(frame),
            )),
            _ => None,
        };
        let nz = self.grid.num_blocks();
        let serving = &self.serving;
        let clients = &self.clients;
        let mut assignment = vec![0usize; nz];
        for m in 0..self.stations.len() {
            let ids = &self.members[m];
            let state = match self.states[m].as_mut() {
                Some(s) => s,
                None => continue,
            };
            let rates: &[Vec<f64>] = match &fast {
                Some(inst) => inst,
                None => serving,
            };
            match self.cfg.scheduler {
                SchedulerPolicy::Rr => {
                    let j = state.rr_pick();
                    assignment.fill(j);
                }
                _ => {
                    let weights: Vec<f64> = ids.iter().map(|&i| clients[i].weight).collect();
                    for (z, slot) in assignment.iter_mut().enumerate() {
                        *slot = state.pf_pick(&weights, |j| rates[ids[j]][z]);
                    }
                }
            }
            let frame_rates = state.apply_frame(&assignment, |j, z| rates[ids[j]][z]);
            for (j, &i) in ids.iter().enumerate() {
                self.window_sum[i] += frame_rates[j];
            }
        }
        self.window_frames += 1;
    }

    fn log_mode(&mut self, epoch: u64, station: usize, to: StationMode, margin: f64) {
        let (from, to_s) = match to {
            StationMode::Sleep => ("active", "sleep"),
            StationMode::Active => ("sleep", "active"),
        };
        self.events.push(EventRecord {
            epoch,
            kind: EventKind::Mode,
            subject: station,
            from: from.into(),
            to: to_s.into(),
            margin,
        });
    }

    fn apply_associations(&mut self, epoch: u64, new_assoc: &[Option<usize>]) {
        let fmt = |a: Option<usize>| a.map_or("none".to_string(), |m| m.to_string());
        for i in 0..self.clients.len() {
            if self.clients[i].association != new_assoc[i] {
                self.events.push(EventRecord {
                    epoch,
                    kind: EventKind::Association,
                    subject: i,
                    from: fmt(self.clients[i].association),
                    to: fmt(new_assoc[i]),
                    margin: 0.0,
                });
                self.clients[i].association = new_assoc[i];
            }
        }
    }

    fn association_epoch(&mut self, t: u64) {
        let epoch = t / self.cfg.assoc_period;
        let window: Vec<f64> = if self.window_frames > 0 {
            self.window_sum.iter().map(|&s| s / self.window_frames as f64).collect()
        } else {
            vec![0.0; self.clients.len()]
        };
        let full = compute_full_rates(&self.tensor, &self.grid, &self.stations, &self.clients, &self.alloc);

        match self.cfg.association {
            AssociationPolicy::Default => {
                let assoc = default_associate(&self.clients, &self.stations);
                self.apply_associations(epoch, &assoc);
            }
            AssociationPolicy::SonZhou => {
                let totals: Vec<Vec<f64>> = self
                    .clients
                    .iter()
                    .map(|c| {
                        (0..self.stations.len())
                            .map(|m| (0..self.grid.num_blocks()).map(|z| full.rate(c.id, m, z)).sum())
                            .collect()
                    })
                    .collect();
                let (assoc, sleeps) =
                    son_zhou_associate(&self.clients, &self.stations, &totals, self.cfg.son_zhou_threshold);
                for (m, margin) in sleeps {
                    self.stations[m].mode = StationMode::Sleep;
                    self.alloc.clear_row(m);
                    self.log_mode(epoch, m, StationMode::Sleep, margin);
                }
                self.apply_associations(epoch, &assoc);
            }
            AssociationPolicy::Proposed => self.proposed_epoch(epoch, &full, &window),
        }

        self.refresh_serving();
        self.rebuild_membership();
        let rec = evaluate(epoch, &self.clients, &window, &self.stations, &self.alloc, &self.grid);
        self.metrics.push(rec);
        self.last_window = window;
        self.window_sum.fill(0.0);
        self.window_frames = 0;
    }

    /// Builds the advertisement each active station would broadcast.
    fn advertisements(&self) -> Vec<CellAdvertisement> {
        (0..self.stations.len())
            .map(|m| match &self.states[m] {
                Some(state) => {
                    let weights: Vec<f64> =
                        self.members[m].iter().map(|&i| self.clients[i].weight).collect();
                    let rows: Vec<&[f64]> =
                        self.members[m].iter().map(|&i| self.serving[i].as_slice()).collect();
                    build_advertisement(m, &weights, &rows, state)
                }
                None => CellAdvertisement {
                    station: m,
                    sum_weight: 0.0,
                    avg_block_throughput: vec![0.0; self.grid.num_blocks()],
                },
            })
            .collect()
    }

    fn estimate(&self, i: usize, m: usize, full: &LinkRateTable, ads: &[CellAdvertisement]) -> f64 {
        let w_i = self.clients[i].weight;
        let own = full.row(i, m);
        match self.cfg.estimator {
            EstimatorKind::Approximate => {
                let mut other_weight = ads[m].sum_weight;
                if self.clients[i].association == Some(m) {
                    other_weight = (other_weight - w_i).max(0.0);
                }
                approximate_estimate(w_i, own, other_weight, &ads[m].avg_block_throughput).rate
            }
            EstimatorKind::Exact => {
                let others: Vec<usize> =
                    self.members[m].iter().copied().filter(|&j| j != i).collect();
                let weights: Vec<f64> = others.iter().map(|&j| self.clients[j].weight).collect();
                let rows: Vec<&[f64]> = others.iter().map(|&j| full.row(j, m)).collect();
                exact_estimate(w_i, own, &weights, &rows, EXACT_SIMULATOR_FRAMES)
            }
        }
    }

    fn proposed_epoch(&mut self, epoch: u64, full: &LinkRateTable, window: &[f64]) {
        // Advertisements and estimates, all on the same pre-epoch snapshot.
        let ads = self.advertisements();
        let decisions: Vec<(Option<AssociationReport>, Vec<(usize, f64)>)> = self
            .clients
            .iter()
            .map(|c| {
                let cands = candidate_set(c.id, &self.stations, full, CANDIDATE_THRESHOLD_NATS);
                let estimates: Vec<(usize, f64)> =
                    cands.iter().map(|&m| (m, self.estimate(c.id, m, full, &ads))).collect();
                (choose_station(c.id, &estimates), estimates)
            })
            .collect();

        // Simultaneous sleep decisions from the reports each station received.
        let mut to_sleep: Vec<(usize, f64)> = Vec::new();
        for st in self.stations.iter().filter(|s| s.is_active()) {
            let reports: Vec<(f64, f64, f64)> = decisions
                .iter()
                .enumerate()
                .filter_map(|(i, (rep, _))| rep.as_ref().map(|r| (i, r)))
                .filter(|(_, r)| r.chosen == st.id)
                .map(|(i, r)| (self.clients[i].weight, r.chosen_rate, r.runner_up_rate))
                .collect();
            let (sleep, margin) = sleep_decision(st.energy_price, st.operation_power_w, &reports);
            if sleep {
                to_sleep.push((st.id, margin));
            }
        }
        for &(m, margin) in &to_sleep {
            self.stations[m].mode = StationMode::Sleep;
            self.alloc.clear_row(m);
            self.log_mode(epoch, m, StationMode::Sleep, margin);
        }

        // Apply the chosen associations; a client whose choice just slept
        // falls back to its best still-active candidate.
        let new_assoc: Vec<Option<usize>> = decisions
            .iter()
            .map(|(rep, estimates)| {
                let chosen = rep.as_ref().map(|r| r.chosen)?;
                if self.stations[chosen].is_active() {
                    return Some(chosen);
                }
                estimates
                    .iter()
                    .filter(|(m, _)| self.stations[*m].is_active())
                    .max_by(|(am, ar), (bm, br)| ar.partial_cmp(br).unwrap().then(bm.cmp(am)))
                    .map(|&(m, _)| m)
            })
            .collect();
        self.apply_associations(epoch, &new_assoc);

        // Beacon round: stations that were already asleep before this epoch
        // estimate their joiners and may wake (never in the same epoch they
        // slept — hysteresis).
        if epoch % self.cfg.beacon_period_epochs == 0 {
            let slept_now: Vec<usize> = to_sleep.iter().map(|&(m, _)| m).collect();
            let beaconers: Vec<usize> = (0..self.stations.len())
                .filter(|&m| !self.stations[m].is_active() && !slept_now.contains(&m))
                .collect();
            let mut to_wake: Vec<(usize, f64)> = Vec::new();
            for m1 in beaconers {
                let solo = beacon_solo_rates(
                    m1,
                    &self.tensor,
                    &self.grid,
                    &self.stations,
                    &self.clients,
                    &self.alloc,
                );
                let reports: Vec<WakeReport> = self
                    .clients
                    .iter()
                    .filter(|c| solo[c.id] > window[c.id])
                    .map(|c| WakeReport {
                        client: c.id,
                        weight: c.weight,
                        solo_rate: solo[c.id],
                        current_rate: window[c.id],
                    })
                    .collect();
                let state = wakeup_estimator(&reports);
                let (wake, margin) = wake_decision(
                    self.stations[m1].energy_price,
                    self.stations[m1].operation_power_w,
                    &state,
                    &reports,
                );
                if wake {
                    to_wake.push((m1, margin));
                }
            }
            for (m1, margin) in to_wake {
                self.stations[m1].mode = StationMode::Active;
                let level = self.stations[m1].power_budget_w / self.grid.num_freq_chunks as f64;
                self.alloc.row_mut(m1).fill(level);
                self.log_mode(epoch, m1, StationMode::Active, margin);
            }
        }
    }
}
