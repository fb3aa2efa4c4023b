//! System-level simulator of a heterogeneous OFDMA cellular downlink.
//!
//! The library models a set of base stations serving weighted clients on a
//! shared grid of resource blocks (reuse-1: every cell uses the whole band).
//! Four mechanisms self-organize the network around a weighted
//! proportional-fairness objective with energy prices:
//!
//! * per-frame **proportional-fair scheduling** at each station
//!   ([`scheduler`]), with a convex-program oracle used by the tests;
//! * periodic distributed **power control** by projected gradient ascent on a
//!   cell-level utility, driven by neighbor reports ([`powerctl`]);
//! * infrequent client-side **association** using either an exact scheduler
//!   replay or a linear-time estimate ([`association`]);
//! * station **sleep/wake** decisions with beaconing and a greedy wakeup
//!   estimator ([`sleepwake`]).
//!
//! [`engine`] wires the three timescales together (frames < power periods <
//! association epochs), [`scenario`] builds the canned topologies, and
//! [`presets`] packages the standard experiment sweeps. Everything is
//! deterministic given a master seed: all randomness flows through keyed
//! counter-derived streams ([`rng`]), and parallelism (the `parallel`
//! feature, on by default) only ever uses order-preserving maps so results
//! are byte-identical with and without it.
//!
//! Rates are natural-log units (nats/s) internally; the metrics layer
//! ([`metrics`]) converts to kbit/s for reporting.

pub mod association;
pub mod channel;
pub mod engine;
pub mod metrics;
pub mod netmodel;
pub mod par;
pub mod powerctl;
pub mod presets;
pub mod rng;
pub mod scenario;
pub mod scheduler;
pub mod sleepwake;
