//! `hetnet` — run downlink-simulation experiments from the command line.
//!
//! Two modes: `--preset <name>` reproduces a canned experiment suite, while
//! `--scenario <name>` runs (or, with `--sweep`, sweeps) a single configured
//! stack. All outputs are CSV files under `--out` (default `$HETNET_OUT` or
//! the working directory), and every run is deterministic in `--seed`.

use anyhow::{bail, Context, Result};
use clap::Parser;
use hetnet_core::engine::{
    run, AssociationPolicy, EstimatorKind, PowerPolicy, SchedulerPolicy, SimConfig,
};
use hetnet_core::metrics::CSV_HEADER;
use hetnet_core::presets::{generate, PresetId};
use hetnet_core::scenario::ScenarioId;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SweepAxis {
    Price,
    Distance,
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "price" => Ok(SweepAxis::Price),
            "distance" => Ok(SweepAxis::Distance),
            other => Err(format!("unknown sweep axis '{other}' (expected price or distance)")),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "hetnet",
    version,
    about = "Deterministic heterogeneous-network downlink simulator: PF scheduling, gradient power control, selfish association, and station sleep/wake"
)]
struct Cli {
    /// Reproduce a canned experiment suite: fig-scheduling | fig-power |
    /// fig-association | fig-large.
    #[arg(long, conflicts_with = "scenario")]
    preset: Option<PresetId>,

    /// Run one scenario directly: grid25 | power-pair | assoc-pair | large.
    #[arg(long)]
    scenario: Option<ScenarioId>,

    /// Master seed(s); each seed is an independent deterministic run.
    #[arg(long, num_args = 1.., default_values_t = [1u64])]
    seed: Vec<u64>,

    /// Energy price applied to every station (direct runs).
    #[arg(long, default_value_t = 0.0)]
    price: f64,

    /// Sweep a direct run over an axis (price | distance) instead of running
    /// once; with --preset, merely asserts the preset sweeps that axis.
    #[arg(long)]
    sweep: Option<SweepAxis>,

    /// Output directory for all CSV files.
    #[arg(long, env = "HETNET_OUT", default_value = ".")]
    out: PathBuf,

    /// Throughput estimator for association decisions: ae | es.
    #[arg(long, default_value = "ae")]
    estimator: EstimatorKind,

    /// Frame scheduler: pf-slow | pf-fast | rr.
    #[arg(long, default_value = "pf-slow")]
    scheduler: SchedulerPolicy,

    /// Power control: gradient | equal.
    #[arg(long, default_value = "gradient")]
    power: PowerPolicy,

    /// Association policy: proposed | default | son-zhou.
    #[arg(long, default_value = "proposed")]
    assoc: AssociationPolicy,

    /// Also write per-run event logs when generating presets.
    #[arg(long)]
    events: bool,

    /// Frames to simulate in direct runs.
    #[arg(long, default_value_t = 2000)]
    horizon: u64,

    /// Inter-station distance in meters for the power-pair scenario.
    #[arg(long, default_value_t = 500.0)]
    distance: f64,
}

fn main() -> Result<()> {
    run_cli(&Cli::parse())
}

fn run_cli(cli: &Cli) -> Result<()> {
    if cli.seed.is_empty() {
        bail!("at least one --seed is required");
    }
    fs::create_dir_all(&cli.out)
        .with_context(|| format!("creating output directory {}", cli.out.display()))?;
    match (cli.preset, cli.scenario) {
        (Some(preset), None) => run_preset(cli, preset),
        (None, Some(scenario)) => match cli.sweep {
            None => run_direct(cli, scenario),
            Some(axis) => run_sweep(cli, scenario, axis),
        },
        (None, None) => bail!("nothing to do: pass --preset or --scenario (see --help)"),
        (Some(_), Some(_)) => unreachable!("clap rejects --preset with --scenario"),
    }
}

/// Prefix that keeps multi-seed invocations from colliding on file names.
fn seed_prefix(cli: &Cli, seed: u64) -> String {
    if cli.seed.len() > 1 {
        format!("s{seed}_")
    } else {
        String::new()
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn preset_axis(preset: PresetId) -> Option<SweepAxis> {
    match preset {
        PresetId::FigScheduling => None,
        PresetId::FigPower => Some(SweepAxis::Distance),
        PresetId::FigAssociation | PresetId::FigLarge => Some(SweepAxis::Price),
    }
}

fn run_preset(cli: &Cli, preset: PresetId) -> Result<()> {
    if let Some(requested) = cli.sweep {
        if preset_axis(preset) != Some(requested) {
            bail!("preset {preset} does not sweep {requested:?}; it sweeps {:?}", preset_axis(preset));
        }
    }
    for &seed in &cli.seed {
        let files = generate(preset, seed, cli.events)?;
        let prefix = seed_prefix(cli, seed);
        let count = files.len();
        for (name, contents) in files {
            write_file(&cli.out, &format!("{prefix}{name}"), &contents)?;
        }
        println!("preset {preset} seed {seed}: wrote {count} files to {}", cli.out.display());
    }
    Ok(())
}

fn direct_config(cli: &Cli, scenario: ScenarioId, seed: u64) -> SimConfig {
    SimConfig {
        scenario,
        seed,
        horizon_frames: cli.horizon,
        estimator: cli.estimator,
        scheduler: cli.scheduler,
        power: cli.power,
        association: cli.assoc,
        energy_price: cli.price,
        power_pair_distance_m: cli.distance,
        ..SimConfig::default()
    }
}

fn summarize(label: &str, out: &hetnet_core::engine::RunOutput) {
    match out.final_metrics() {
        Some(rec) => println!(
            "{label}: objective={} weighted_throughput={} total_power={} efficiency={}",
            rec.objective, rec.weighted_throughput, rec.total_power_w, rec.energy_efficiency
        ),
        None => println!("{label}: no epochs completed"),
    }
}

fn run_direct(cli: &Cli, scenario: ScenarioId) -> Result<()> {
    for &seed in &cli.seed {
        let cfg = direct_config(cli, scenario, seed);
        let out = run(&cfg)?;
        let prefix = seed_prefix(cli, seed);
        write_file(&cli.out, &format!("{prefix}metrics.csv"), &out.metrics_csv())?;
        write_file(&cli.out, &format!("{prefix}events.csv"), &out.events_csv())?;
        summarize(&format!("{scenario} seed {seed}"), &out);
    }
    Ok(())
}

fn run_sweep(cli: &Cli, scenario: ScenarioId, axis: SweepAxis) -> Result<()> {
    if axis == SweepAxis::Distance && scenario != ScenarioId::PowerPair {
        bail!("--sweep distance only applies to --scenario power-pair");
    }
    let policy = format!("{}+{}+{}", cli.scheduler, cli.power, cli.assoc);
    let (axis_name, points): (&str, Vec<f64>) = match axis {
        SweepAxis::Price => ("energy_price", (1..=12).map(|k| k as f64 / 100.0).collect()),
        SweepAxis::Distance => ("distance_m", (1..=10).map(|k| (100 * k) as f64).collect()),
    };
    for &seed in &cli.seed {
        let mut doc = format!("{axis_name},policy,{}\n", CSV_HEADER.strip_prefix("epoch,").unwrap());
        for &x in &points {
            let mut cfg = direct_config(cli, scenario, seed);
            match axis {
                SweepAxis::Price => cfg.energy_price = x,
                SweepAxis::Distance => cfg.power_pair_distance_m = x,
            }
            let out = run(&cfg)?;
            let rec = out
                .final_metrics()
                .with_context(|| format!("no epochs completed at {axis_name}={x}"))?;
            doc.push_str(&format!("{x},{policy},{}\n", rec.csv_fields()));
        }
        let name = format!("{}{axis_name}_sweep.csv", seed_prefix(cli, seed));
        let path = write_file(&cli.out, &name, &doc)?;
        println!("{scenario} seed {seed}: swept {} points of {axis_name} into {}", points.len(), path.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("hetnet").chain(args.iter().copied()))
    }

    #[test]
    fn flag_parsing() {
        let cli = parse(&[
            "--scenario", "grid25", "--scheduler", "rr", "--price", "0.5", "--seed", "3", "7",
        ])
        .unwrap();
        assert_eq!(cli.scenario, Some(ScenarioId::Grid25));
        assert_eq!(cli.scheduler, SchedulerPolicy::Rr);
        assert_eq!(cli.price, 0.5);
        assert_eq!(cli.seed, vec![3, 7]);
        assert!(parse(&["--preset", "fig-power", "--scenario", "grid25"]).is_err());
        assert!(parse(&["--scheduler", "fifo"]).is_err());
        assert!(parse(&["--preset", "fig-everything"]).is_err());
    }

    #[test]
    fn no_work_is_an_error() {
        let cli = parse(&[]).unwrap();
        assert!(run_cli(&cli).is_err());
    }

    #[test]
    fn sweep_axis_must_match_preset() {
        let dir = tempfile::tempdir().unwrap();
        let mut cli = parse(&["--preset", "fig-large", "--sweep", "distance"]).unwrap();
        cli.out = dir.path().to_path_buf();
        let err = run_cli(&cli).unwrap_err().to_string();
        assert!(err.contains("does not sweep"), "{err}");
        // Distance sweeps need the two-station power scenario.
        let mut cli = parse(&["--scenario", "grid25", "--sweep", "distance"]).unwrap();
        cli.out = dir.path().to_path_buf();
        assert!(run_cli(&cli).is_err());
    }

    #[test]
    fn direct_run_writes_metrics_and_events() {
        let dir = tempfile::tempdir().unwrap();
        let mut cli = parse(&[
            "--scenario", "grid25", "--scheduler", "rr", "--power", "equal", "--assoc", "default",
            "--horizon", "100",
        ])
        .unwrap();
        cli.out = dir.path().to_path_buf();
        run_cli(&cli).unwrap();
        let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert!(metrics.starts_with(CSV_HEADER));
        assert_eq!(metrics.trim_end().lines().count(), 2, "one epoch at horizon 100");
        assert!(dir.path().join("events.csv").exists());
    }

    #[test]
    fn multi_seed_runs_get_prefixed_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut cli = parse(&[
            "--scenario", "grid25", "--scheduler", "rr", "--power", "equal", "--assoc", "default",
            "--horizon", "100", "--seed", "1", "2",
        ])
        .unwrap();
        cli.out = dir.path().to_path_buf();
        run_cli(&cli).unwrap();
        for seed in [1, 2] {
            assert!(dir.path().join(format!("s{seed}_metrics.csv")).exists());
            assert!(dir.path().join(format!("s{seed}_events.csv")).exists());
        }
    }
}
