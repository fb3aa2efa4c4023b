//! Channel model: path loss, per-chunk log-normal shadowing, Rayleigh fast
//! fading with Doppler-correlated evolution, and the SINR/Shannon-rate
//! computations built on top of them.
//!
//! Static gains (path loss × shadowing) are constant in time and across the
//! slots of a chunk; fast fading multiplies them per (chunk, frame) in the
//! fast-feedback variant. All rates are nats/s internally; [`nats_to_kbit`]
//! converts at the reporting boundary.

use crate::netmodel::{BaseStation, Client, PowerAllocation, ResourceBlockGrid};
use crate::par;
use crate::rng::{self, tag};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::TAU;

/// Distance clamp: path loss is evaluated at no less than 1 m.
pub const D_MIN_KM: f64 = 0.001;

/// Gains below this are treated as zero in denominators to avoid division
/// blow-ups (used by power control's pruning guards too).
pub const DENOM_GUARD_W: f64 = 1e-30;

/// Path loss in dB at distance `d_km`, clamped below at [`D_MIN_KM`].
pub fn path_loss_db(d_km: f64) -> f64 {
    128.1 + 37.6 * d_km.max(D_MIN_KM).log10()
}

/// Converts a dB loss (path loss + shadowing) to a linear power gain.
pub fn db_loss_to_linear_gain(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Converts nats/s to kbit/s (ln → log2, bits → kbits).
pub fn nats_to_kbit(r_nats: f64) -> f64 {
    r_nats / (std::f64::consts::LN_2 * 1000.0)
}

/// Converts kbit/s to nats/s.
pub fn kbit_to_nats(r_kbit: f64) -> f64 {
    r_kbit * (std::f64::consts::LN_2 * 1000.0)
}

/// Shannon rate B·ln(1 + SINR) in nats/s.
#[inline]
pub fn shannon_rate_nats(bandwidth_hz: f64, sinr: f64) -> f64 {
    bandwidth_hz * sinr.ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChannelParams {
    /// Shadowing standard deviation in dB.
    pub shadowing_std_db: f64,
    /// Maximum Doppler shift of the fast-fading process, Hz.
    pub doppler_hz: f64,
    /// Number of sinusoids in the sum-of-sinusoids fading generator.
    pub num_sinusoids: usize,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams { shadowing_std_db: 8.0, doppler_hz: 5.0, num_sinusoids: 16 }
    }
}

/// One deterministic shadowing draw in dB, keyed by (client, station, chunk).
/// Draws are N(0, σ²) and time-invariant.
pub fn sample_shadowing_db(master_seed: u64, params: &ChannelParams, client: usize, station: usize, chunk: usize) -> f64 {
    let mut rng = rng::stream(master_seed, tag::SHADOWING, &[client as u64, station as u64, chunk as u64]);
    Normal::new(0.0, params.shadowing_std_db).unwrap().sample(&mut rng)
}

/// Sum-of-sinusoids fading parameters for one (link, chunk): angular rates
/// ω_n = 2π·f_D·cos(α_n) and phases φ_n, with α_n, φ_n ~ U[0, 2π).
#[derive(Debug, Clone)]
pub struct FadeSinusoids {
    pub omega: Vec<f64>,
    pub phase: Vec<f64>,
}

impl FadeSinusoids {
    pub fn sample<R: Rng>(rng: &mut R, params: &ChannelParams) -> Self {
        let n = params.num_sinusoids;
        let mut omega = Vec::with_capacity(n);
        let mut phase = Vec::with_capacity(n);
        for _ in 0..n {
            let alpha: f64 = rng.gen_range(0.0..TAU);
            omega.push(TAU * params.doppler_hz * alpha.cos());
            phase.push(rng.gen_range(0.0..TAU));
        }
        FadeSinusoids { omega, phase }
    }

    /// Instantaneous power factor |Y(t)|² of the complex envelope
    /// Y(t) = √(1/N) Σ_n exp(j(ω_n t + φ_n)); unit mean over the phase draws.
    pub fn power_factor(&self, t_s: f64) -> f64 {
        let mut re = 0.0;
        let mut im = 0.0;
        for (&w, &p) in self.omega.iter().zip(&self.phase) {
            let (s, c) = (w * t_s + p).sin_cos();
            re += c;
            im += s;
        }
        (re * re + im * im) / self.omega.len() as f64
    }
}

/// Deterministic fading power factor for a (client, station, chunk) link at
/// the given frame, evaluated from freshly keyed sinusoid parameters. The
/// engine uses the prebuilt [`GainTensor`] bank instead; this standalone form
/// backs the statistical tests.
pub fn sample_fast_fading(
    master_seed: u64,
    params: &ChannelParams,
    grid: &ResourceBlockGrid,
    client: usize,
    station: usize,
    chunk: usize,
    frame: u64,
) -> f64 {
    let bank = link_fade_bank(master_seed, params, client, station, chunk + 1);
    bank[chunk].power_factor(frame as f64 * grid.frame_duration_s)
}

/// Draws the per-chunk sinusoid banks for one (client, station) link.
fn link_fade_bank(master_seed: u64, params: &ChannelParams, client: usize, station: usize, num_chunks: usize) -> Vec<FadeSinusoids> {
    let mut rng = rng::stream(master_seed, tag::FADING, &[client as u64, station as u64]);
    (0..num_chunks).map(|_| FadeSinusoids::sample(&mut rng, params)).collect()
}

/// All channel gains of one scenario.
///
/// * `client_gain[(i, m, chunk)]`: static linear gain client i ← station m
///   (path loss × shadowing), time-invariant.
/// * `station_gain[(m, l, chunk)]`: station-to-station gain used by the power
///   controller's cell model; symmetric, keyed on the unordered pair.
/// * optional fading banks per (client, station, chunk) for the fast variant.
#[derive(Debug, Clone)]
pub struct GainTensor {
    num_clients: usize,
    num_stations: usize,
    num_chunks: usize,
    client_gain: Vec<f64>,
    station_gain: Vec<f64>,
    fade: Option<Vec<FadeSinusoids>>,
    frame_duration_s: f64,
}

impl GainTensor {
    /// Builds the tensor for a scenario. `with_fading` controls whether the
    /// (memory-heavy) fast-fading banks are drawn; slow-feedback runs skip
    /// them. Fading banks are drawn per (client, station) regardless of which
    /// stations are currently active, so mode changes never reshuffle draws.
    pub fn build(
        master_seed: u64,
        params: &ChannelParams,
        grid: &ResourceBlockGrid,
        stations: &[BaseStation],
        clients: &[Client],
        with_fading: bool,
    ) -> Self {
        let (nc, nm, nch) = (clients.len(), stations.len(), grid.num_freq_chunks);
        let client_gain: Vec<f64> = {
            let rows = par::map_range(nc, |i| {
                let mut row = Vec::with_capacity(nm * nch);
                for m in 0..nm {
                    let d_km = crate::netmodel::distance_m(clients[i].position, stations[m].position) / 1000.0;
                    let pl = path_loss_db(d_km);
                    for ch in 0..nch {
                        let x = sample_shadowing_db(master_seed, params, i, m, ch);
                        row.push(db_loss_to_linear_gain(pl + x));
                    }
                }
                row
            });
            rows.into_iter().flatten().collect()
        };
        let mut station_gain = vec![0.0; nm * nm * nch];
        for a in 0..nm {
            for b in (a + 1)..nm {
                let d_km = crate::netmodel::distance_m(stations[a].position, stations[b].position) / 1000.0;
                let pl = path_loss_db(d_km);
                let normal = Normal::new(0.0, params.shadowing_std_db).unwrap();
                for ch in 0..nch {
                    let mut srng =
                        rng::stream(master_seed, tag::SHADOWING_S2S, &[a as u64, b as u64, ch as u64]);
                    let x: f64 = normal.sample(&mut srng);
                    let g = db_loss_to_linear_gain(pl + x);
                    station_gain[(a * nm + b) * nch + ch] = g;
                    station_gain[(b * nm + a) * nch + ch] = g;
                }
            }
        }
        let fade = with_fading.then(|| {
            let banks = par::map_range(nc, |i| {
                let mut per_client = Vec::with_capacity(nm * nch);
                for m in 0..nm {
                    per_client.extend(link_fade_bank(master_seed, params, i, m, nch));
                }
                per_client
            });
            banks.into_iter().flatten().collect()
        });
        GainTensor {
            num_clients: nc,
            num_stations: nm,
            num_chunks: nch,
            client_gain,
            station_gain,
            fade,
            frame_duration_s: grid.frame_duration_s,
        }
    }

    pub fn num_clients(&self) -> usize {
        self.num_clients
    }

    pub fn num_stations(&self) -> usize {
        self.num_stations
    }

    pub fn num_chunks(&self) -> usize {
        self.num_chunks
    }

    pub fn has_fading(&self) -> bool {
        self.fade.is_some()
    }

    /// Static gain client `i` ← station `m` on `chunk`.
    #[inline]
    pub fn static_gain(&self, i: usize, m: usize, chunk: usize) -> f64 {
        self.client_gain[(i * self.num_stations + m) * self.num_chunks + chunk]
    }

    /// Station-to-station gain `m` ← `l` on `chunk` (symmetric).
    #[inline]
    pub fn station_gain(&self, m: usize, l: usize, chunk: usize) -> f64 {
        self.station_gain[(m * self.num_stations + l) * self.num_chunks + chunk]
    }

    /// Fading power factor at `frame`; requires the tensor to have been built
    /// `with_fading`.
    #[inline]
    pub fn fade_factor(&self, i: usize, m: usize, chunk: usize, frame: u64) -> f64 {
        let banks = self.fade.as_ref().expect("gain tensor built without fading banks");
        banks[(i * self.num_stations + m) * self.num_chunks + chunk]
            .power_factor(frame as f64 * self.frame_duration_s)
    }

    /// Instantaneous (or static, if `frame` is `None`) gain client `i` ← `m`.
    #[inline]
    pub fn gain(&self, i: usize, m: usize, chunk: usize, frame: Option<u64>) -> f64 {
        let g = self.static_gain(i, m, chunk);
        match frame {
            Some(k) => g * self.fade_factor(i, m, chunk, k),
            None => g,
        }
    }

    /// Dumps the static client gains as tab-separated rows
    /// (client, station, chunk, gain) for offline inspection.
    pub fn dump_static_gains(&self) -> String {
        let mut out = String::from("client\tstation\tchunk\tstatic_gain\n");
        for i in 0..self.num_clients {
            for m in 0..self.num_stations {
                for ch in 0..self.num_chunks {
                    out.push_str(&format!("{i}\t{m}\t{ch}\t{}\n", self.static_gain(i, m, ch)));
                }
            }
        }
        out
    }
}

/// Reference single-link SINR: signal over noise plus the explicit sum of
/// interference from every other station. The bulk rate computations below
/// are the hot path; this form is kept as the direct transliteration for
/// tests (the two agree to ~1e-12 relative).
pub fn sinr(
    tensor: &GainTensor,
    grid: &ResourceBlockGrid,
    clients: &[Client],
    alloc: &PowerAllocation,
    i: usize,
    m: usize,
    z: usize,
    frame: Option<u64>,
) -> f64 {
    let chunk = grid.chunk_of(z);
    let signal = tensor.gain(i, m, chunk, frame) * alloc.get(m, z);
    if signal <= 0.0 {
        return 0.0;
    }
    let mut denom = clients[i].noise_w[z];
    for l in 0..tensor.num_stations() {
        if l != m {
            denom += tensor.gain(i, l, chunk, frame) * alloc.get(l, z);
        }
    }
    signal / denom
}

/// H_{i,m,z} in nats/s for every (client, station, block); rows for sleeping
/// or zero-power stations are zero. Slow (static-gain) variant.
#[derive(Debug, Clone)]
pub struct LinkRateTable {
    num_stations: usize,
    num_blocks: usize,
    h: Vec<f64>,
}

impl LinkRateTable {
    /// Builds a table from an explicit rate function (mainly for tests).
    pub fn from_rows(
        num_clients: usize,
        num_stations: usize,
        num_blocks: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Self {
        let mut h = Vec::with_capacity(num_clients * num_stations * num_blocks);
        for i in 0..num_clients {
            for m in 0..num_stations {
                for z in 0..num_blocks {
                    h.push(f(i, m, z));
                }
            }
        }
        LinkRateTable { num_stations, num_blocks, h }
    }

    #[inline]
    pub fn num_stations(&self) -> usize {
        self.num_stations
    }

    #[inline]
    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    #[inline]
    pub fn rate(&self, i: usize, m: usize, z: usize) -> f64 {
        self.h[(i * self.num_stations + m) * self.num_blocks + z]
    }

    /// The |Z|-long rate row of one (client, station) pair.
    #[inline]
    pub fn row(&self, i: usize, m: usize) -> &[f64] {
        let start = (i * self.num_stations + m) * self.num_blocks;
        &self.h[start..start + self.num_blocks]
    }
}

/// Accumulates, for one client and block, the total received power from all
/// active stations; per-station SINRs are then signal/(noise + total − signal).
fn rate_row_all_stations(
    tensor: &GainTensor,
    grid: &ResourceBlockGrid,
    client: &Client,
    i: usize,
    alloc: &PowerAllocation,
    active: &[bool],
    out: &mut [f64],
) {
    let nm = tensor.num_stations();
    let nz = grid.num_blocks();
    let b_hz = grid.block_bandwidth_hz;
    for z in 0..nz {
        let chunk = grid.chunk_of(z);
        let mut total = 0.0;
        for l in 0..nm {
            if active[l] {
                total += tensor.static_gain(i, l, chunk) * alloc.get(l, z);
            }
        }
        let noise = client.noise_w[z];
        for m in 0..nm {
            let h = if active[m] {
                let signal = tensor.static_gain(i, m, chunk) * alloc.get(m, z);
                if signal <= 0.0 {
                    0.0
                } else {
                    let denom = noise + (total - signal).max(0.0);
                    shannon_rate_nats(b_hz, signal / denom)
                }
            } else {
                0.0
            };
            out[m * nz + z] = h;
        }
    }
}

/// Computes the full slow-variant rate table (all clients × all stations).
pub fn compute_full_rates(
    tensor: &GainTensor,
    grid: &ResourceBlockGrid,
    stations: &[BaseStation],
    clients: &[Client],
    alloc: &PowerAllocation,
) -> LinkRateTable {
    let active: Vec<bool> = stations.iter().map(|s| s.is_active()).collect();
    let nm = tensor.num_stations();
    let nz = grid.num_blocks();
    let rows = par::map_slice(clients, |c| {
        let mut row = vec![0.0; nm * nz];
        rate_row_all_stations(tensor, grid, c, c.id, alloc, &active, &mut row);
        row
    });
    LinkRateTable { num_stations: nm, num_blocks: nz, h: rows.into_iter().flatten().collect() }
}

/// Computes each client's serving-link rate row H_{i,m(i),z} (zeros when
/// unassociated). `frame` switches on instantaneous fading for every gain in
/// both signal and interference (the fast variant).
pub fn compute_serving_rates(
    tensor: &GainTensor,
    grid: &ResourceBlockGrid,
    stations: &[BaseStation],
    clients: &[Client],
    alloc: &PowerAllocation,
    frame: Option<u64>,
) -> Vec<Vec<f64>> {
    let active: Vec<bool> = stations.iter().map(|s| s.is_active()).collect();
    let nm = tensor.num_stations();
    let nz = grid.num_blocks();
    let nch = grid.num_freq_chunks;
    let b_hz = grid.block_bandwidth_hz;
    par::map_slice(clients, |c| {
        let i = c.id;
        let m = match c.association {
            Some(m) if active[m] => m,
            _ => return vec![0.0; nz],
        };
        // Per-chunk instantaneous gains to every station for this frame.
        let mut gains = vec![0.0; nm * nch];
        for l in 0..nm {
            if active[l] {
                for ch in 0..nch {
                    gains[l * nch + ch] = tensor.gain(i, l, ch, frame);
                }
            }
        }
        let mut row = vec![0.0; nz];
        for z in 0..nz {
            let chunk = grid.chunk_of(z);
            let mut total = 0.0;
            for l in 0..nm {
                if active[l] {
                    total += gains[l * nch + chunk] * alloc.get(l, z);
                }
            }
            let signal = gains[m * nch + chunk] * alloc.get(m, z);
            if signal > 0.0 {
                let denom = c.noise_w[z] + (total - signal).max(0.0);
                row[z] = shannon_rate_nats(b_hz, signal / denom);
            }
        }
        row
    })
}

/// Samples the per-(client, block) receiver noise rows, U[3.5, 4.5]×10⁻¹⁵ W.
pub fn sample_noise_row(master_seed: u64, client: usize, num_blocks: usize) -> Vec<f64> {
    let mut rng = rng::stream(master_seed, tag::NOISE, &[client as u64]);
    (0..num_blocks).map(|_| rng.gen_range(3.5e-15..4.5e-15)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{BaseStation, StationKind, StationMode};
    use approx::assert_relative_eq;

    #[test]
    fn path_loss_reference_points() {
        assert_relative_eq!(path_loss_db(1.0), 128.1, max_relative = 1e-12);
        assert_relative_eq!(path_loss_db(0.1), 90.5, max_relative = 1e-12);
        // 128.1 + 37.6·log10(0.05) = 128.1 − 48.9187278369657…
        assert_relative_eq!(path_loss_db(0.05), 79.181_272_163_034_3, max_relative = 1e-9);
    }

    #[test]
    fn path_loss_clamps_at_one_meter() {
        assert_eq!(path_loss_db(0.0), path_loss_db(D_MIN_KM));
        assert_eq!(path_loss_db(-5.0), path_loss_db(D_MIN_KM));
        assert!(path_loss_db(0.0).is_finite());
    }

    #[test]
    fn db_conversion_reference() {
        // PL 90.5 dB, no shadowing, no fading → 10^(−9.05).
        assert_relative_eq!(db_loss_to_linear_gain(90.5), 8.912_509_381_337_456e-10, max_relative = 1e-12);
    }

    #[test]
    fn shadowing_moments() {
        let params = ChannelParams::default();
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|k| sample_shadowing_db(42, &params, k % 640, k / 640, 7)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.1, "shadowing mean {mean} off 0");
        assert!((var.sqrt() - 8.0).abs() < 0.1, "shadowing std {} off 8", var.sqrt());
    }

    #[test]
    fn shadowing_deterministic() {
        let params = ChannelParams::default();
        assert_eq!(sample_shadowing_db(7, &params, 1, 2, 3), sample_shadowing_db(7, &params, 1, 2, 3));
        assert_ne!(sample_shadowing_db(7, &params, 1, 2, 3), sample_shadowing_db(7, &params, 2, 1, 3));
    }

    #[test]
    fn fading_unit_mean_power() {
        let params = ChannelParams::default();
        let grid = ResourceBlockGrid::default();
        let mut acc = 0.0;
        let mut count = 0;
        for link in 0..400 {
            for frame in 0..50 {
                acc += sample_fast_fading(9, &params, &grid, link, 0, 3, frame * 37);
                count += 1;
            }
        }
        let mean = acc / count as f64;
        assert!((mean - 1.0).abs() < 0.02, "fading mean power {mean} not ~1");
    }

    #[test]
    fn fading_correlation_decays_with_lag() {
        let params = ChannelParams::default();
        let grid = ResourceBlockGrid::default();
        // Empirical autocovariance of the power process at 1-frame (10 ms) and
        // 10-frame (100 ms) lags, pooled over many independent links.
        let mut cov = [0.0f64; 2];
        let mut var = 0.0f64;
        let lags = [1u64, 10];
        let horizon = 220;
        let links = 300;
        for link in 0..links {
            let bank = link_fade_bank(11, &params, link, 0, 1);
            let series: Vec<f64> =
                (0..horizon).map(|k| bank[0].power_factor(k as f64 * grid.frame_duration_s)).collect();
            let mean = series.iter().sum::<f64>() / horizon as f64;
            for (j, &lag) in lags.iter().enumerate() {
                for k in 0..horizon - lag as usize {
                    cov[j] += (series[k] - mean) * (series[k + lag as usize] - mean);
                }
            }
            for k in 0..horizon {
                var += (series[k] - mean) * (series[k] - mean);
            }
        }
        let corr10ms = cov[0] / var;
        let corr100ms = cov[1] / var;
        assert!(
            corr10ms > corr100ms + 0.1,
            "10 ms correlation {corr10ms} not clearly above 100 ms correlation {corr100ms}"
        );
        assert!(corr10ms > 0.5, "10 ms lag should be strongly correlated, got {corr10ms}");
    }

    #[test]
    fn fading_lag_zero_is_one() {
        // Trivially, the power process correlates perfectly with itself.
        let params = ChannelParams::default();
        let grid = ResourceBlockGrid::default();
        let a = sample_fast_fading(3, &params, &grid, 0, 0, 0, 17);
        let b = sample_fast_fading(3, &params, &grid, 0, 0, 0, 17);
        assert_eq!(a, b);
    }

    #[test]
    fn shannon_rate_reference() {
        assert_eq!(shannon_rate_nats(180e3, 0.0), 0.0);
        // 180 kHz at SINR 1 → 180000·ln 2 nats/s = exactly 180 kbit/s.
        let r = shannon_rate_nats(180e3, 1.0);
        assert_relative_eq!(r, 180000.0 * std::f64::consts::LN_2, max_relative = 1e-12);
        assert_relative_eq!(nats_to_kbit(r), 180.0, max_relative = 1e-12);
        // Monotone, and concave over equally spaced SINR points.
        let (r1, r2, r3) = (shannon_rate_nats(1.0, 1.0), shannon_rate_nats(1.0, 2.0), shannon_rate_nats(1.0, 3.0));
        assert!(r1 < r2 && r2 < r3);
        assert!(r2 - r1 > r3 - r2);
    }

    #[test]
    fn rate_conversion_round_trip() {
        for &r in &[1.0, 123.456, 9.9e6] {
            assert_relative_eq!(kbit_to_nats(nats_to_kbit(r)), r, max_relative = 1e-14);
        }
    }

    fn two_station_setup() -> (GainTensor, ResourceBlockGrid, Vec<BaseStation>, Vec<Client>, PowerAllocation) {
        let grid = ResourceBlockGrid::default();
        let stations = vec![
            BaseStation::new(0, StationKind::Macro, [0.0, 0.0]),
            BaseStation::new(1, StationKind::Macro, [800.0, 0.0]),
        ];
        let clients: Vec<Client> = (0..3)
            .map(|i| Client {
                id: i,
                position: [150.0 * i as f64, 60.0],
                weight: 1.0,
                association: Some(0),
                noise_w: sample_noise_row(5, i, grid.num_blocks()),
            })
            .collect();
        let tensor = GainTensor::build(5, &ChannelParams::default(), &grid, &stations, &clients, false);
        let mut alloc = PowerAllocation::zeros(2, grid.num_blocks());
        for m in 0..2 {
            for z in 0..grid.num_blocks() {
                alloc.set(m, z, stations[m].power_budget_w / grid.num_freq_chunks as f64);
            }
        }
        (tensor, grid, stations, clients, alloc)
    }

    #[test]
    fn sinr_reference_arithmetic() {
        // signal 2e−12, noise 4e−15, no interferers → 500.
        let grid = ResourceBlockGrid::default();
        let stations = vec![BaseStation::new(0, StationKind::Macro, [0.0, 0.0])];
        let clients = vec![Client {
            id: 0,
            position: [0.0, 0.0],
            weight: 1.0,
            association: Some(0),
            noise_w: vec![4e-15; grid.num_blocks()],
        }];
        let mut tensor = GainTensor::build(1, &ChannelParams::default(), &grid, &stations, &clients, false);
        // Overwrite the single link's gains with a flat 5e−12 so the quotient is exact.
        for g in tensor.client_gain.iter_mut() {
            *g = 5e-12;
        }
        let mut alloc = PowerAllocation::zeros(1, grid.num_blocks());
        alloc.set(0, 0, 0.4);
        let s = sinr(&tensor, &grid, &clients, &alloc, 0, 0, 0, None);
        assert_relative_eq!(s, 5e-12 * 0.4 / 4e-15, max_relative = 1e-12);
        // Zero serving power → zero SINR.
        assert_eq!(sinr(&tensor, &grid, &clients, &alloc, 0, 0, 1, None), 0.0);
    }

    #[test]
    fn sinr_decreases_with_interference() {
        let (tensor, grid, _stations, clients, mut alloc) = two_station_setup();
        let with = sinr(&tensor, &grid, &clients, &alloc, 0, 0, 0, None);
        alloc.clear_row(1);
        let without = sinr(&tensor, &grid, &clients, &alloc, 0, 0, 0, None);
        assert!(with < without, "interference must strictly decrease SINR");
    }

    #[test]
    fn bulk_rates_match_reference_sinr() {
        let (tensor, grid, stations, clients, alloc) = two_station_setup();
        let table = compute_full_rates(&tensor, &grid, &stations, &clients, &alloc);
        for i in 0..clients.len() {
            for m in 0..stations.len() {
                for &z in &[0usize, 17, 501, 999] {
                    let direct = shannon_rate_nats(
                        grid.block_bandwidth_hz,
                        sinr(&tensor, &grid, &clients, &alloc, i, m, z, None),
                    );
                    // The bulk path forms interference as total−signal; at
                    // high SINR that subtraction cancels ~20 bits against the
                    // reference's direct interference sum, so the comparison
                    // allows for it (1e-9 ≪ any physically meaningful scale).
                    assert_relative_eq!(table.rate(i, m, z), direct, max_relative = 1e-9);
                }
            }
        }
    }

    #[test]
    fn serving_rates_match_full_table() {
        let (tensor, grid, stations, clients, alloc) = two_station_setup();
        let table = compute_full_rates(&tensor, &grid, &stations, &clients, &alloc);
        let serving = compute_serving_rates(&tensor, &grid, &stations, &clients, &alloc, None);
        for c in &clients {
            for z in 0..grid.num_blocks() {
                assert_eq!(serving[c.id][z], table.rate(c.id, 0, z));
            }
        }
    }

    #[test]
    fn sleeping_station_rates_are_zero() {
        let (tensor, grid, mut stations, clients, mut alloc) = two_station_setup();
        stations[1].mode = StationMode::Sleep;
        alloc.clear_row(1);
        let table = compute_full_rates(&tensor, &grid, &stations, &clients, &alloc);
        for i in 0..clients.len() {
            assert!(table.row(i, 1).iter().all(|&h| h == 0.0));
            assert!(table.row(i, 0).iter().all(|&h| h > 0.0));
        }
    }

    #[test]
    fn noise_rows_in_range_and_deterministic() {
        let row = sample_noise_row(21, 4, 1000);
        assert_eq!(row, sample_noise_row(21, 4, 1000));
        assert!(row.iter().all(|&n| (3.5e-15..4.5e-15).contains(&n)));
        let mean = row.iter().sum::<f64>() / row.len() as f64;
        assert!((mean - 4e-15).abs() < 0.05e-15);
    }

    #[test]
    fn gain_tensor_deterministic_and_positive() {
        let (tensor, grid, stations, clients, _alloc) = two_station_setup();
        let again = GainTensor::build(5, &ChannelParams::default(), &grid, &stations, &clients, false);
        assert_eq!(tensor.client_gain, again.client_gain);
        assert_eq!(tensor.station_gain, again.station_gain);
        assert!(tensor.client_gain.iter().all(|&g| g > 0.0));
        // Station gains symmetric.
        for ch in 0..grid.num_freq_chunks {
            assert_eq!(tensor.station_gain(0, 1, ch), tensor.station_gain(1, 0, ch));
        }
    }

    #[test]
    fn fade_composition_is_multiplicative() {
        let grid = ResourceBlockGrid::default();
        let stations = vec![BaseStation::new(0, StationKind::Macro, [0.0, 0.0])];
        let clients = vec![Client {
            id: 0,
            position: [100.0, 0.0],
            weight: 1.0,
            association: Some(0),
            noise_w: sample_noise_row(3, 0, grid.num_blocks()),
        }];
        let tensor = GainTensor::build(3, &ChannelParams::default(), &grid, &stations, &clients, true);
        let slow = tensor.gain(0, 0, 7, None);
        let factor = tensor.fade_factor(0, 0, 7, 55);
        assert_relative_eq!(tensor.gain(0, 0, 7, Some(55)), slow * factor, max_relative = 1e-15);
    }

    #[test]
    fn gain_dump_has_header_and_rows() {
        let (tensor, grid, _stations, clients, _alloc) = two_station_setup();
        let dump = tensor.dump_static_gains();
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines[0], "client\tstation\tchunk\tstatic_gain");
        assert_eq!(lines.len(), 1 + clients.len() * 2 * grid.num_freq_chunks);
    }
}
