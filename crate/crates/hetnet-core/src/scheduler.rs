//! Per-station resource-block scheduling: the online proportional-fair rule
//! with its fraction/throughput bookkeeping, a round-robin baseline, and a
//! convex-program oracle used by the tests to certify optimality.
//!
//! Scheduling is per frame: each of the station's blocks is assigned to
//! exactly one associated client, and the allocation fractions follow
//! φ[k+1] = (k−1)/k·φ[k] + 1{scheduled}/k, with the client throughputs r_i
//! updated by the same averaging over realized per-frame rates.

use thiserror::Error;

/// Cold-start epsilon for the average throughputs (nats/s).
pub const COLD_START_EPS: f64 = 1e-9;

/// Per-station scheduling state over its currently associated clients
/// (client indexing here is local: position in the station's member list,
/// ordered by ascending client id).
#[derive(Debug, Clone)]
pub struct ScheduleState {
    frames_elapsed: u64,
    num_clients: usize,
    num_blocks: usize,
    /// φ_{i,z}: fraction of past frames in which local client i held block z.
    phi: Vec<f64>,
    /// r_i: running average throughput of local client i, nats/s.
    r: Vec<f64>,
}

impl ScheduleState {
    /// Initializes state for a station's member list. `static_rates[i]` is the
    /// |Z|-long slow-variant rate row of local client i, used only to seed the
    /// averages: r_i(0) = ε + max_z H_{i,z}/|Z|, so the very first argmax is
    /// well defined. The seed washes out after the first frame.
    pub fn cold_start(static_rates: &[&[f64]], num_blocks: usize) -> Self {
        let num_clients = static_rates.len();
        let r = static_rates
            .iter()
            .map(|row| {
                let best = row.iter().cloned().fold(0.0f64, f64::max);
                COLD_START_EPS + best / num_blocks as f64
            })
            .collect();
        ScheduleState {
            frames_elapsed: 0,
            num_clients,
            num_blocks,
            phi: vec![0.0; num_clients * num_blocks],
            r,
        }
    }

    pub fn frames_elapsed(&self) -> u64 {
        self.frames_elapsed
    }

    pub fn num_clients(&self) -> usize {
        self.num_clients
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    /// Current average throughput of local client i, nats/s.
    pub fn avg_rate(&self, i: usize) -> f64 {
        self.r[i]
    }

    pub fn avg_rates(&self) -> &[f64] {
        &self.r
    }

    /// Current allocation fraction φ_{i,z}.
    pub fn fraction(&self, i: usize, z: usize) -> f64 {
        self.phi[i * self.num_blocks + z]
    }

    /// The PF pick on one block: argmax_i w_i·H_{i,z}/r_i, ties to the lowest
    /// local index (= lowest client id). `rate_at(i)` supplies H or Ĥ for
    /// this block depending on the feedback variant.
    pub fn pf_pick(&self, weights: &[f64], rate_at: impl Fn(usize) -> f64) -> usize {
        debug_assert_eq!(weights.len(), self.num_clients);
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for i in 0..self.num_clients {
            let score = weights[i] * rate_at(i) / self.r[i];
            if score > best_score {
                best_score = score;
                best = i;
            }
        }
        best
    }

    /// Round-robin pick for the current frame: the rotation position advances
    /// once per frame and every block of the frame goes to the same client.
    pub fn rr_pick(&self) -> usize {
        (self.frames_elapsed % self.num_clients as u64) as usize
    }

    /// Applies one scheduled frame: `assignment[z]` is the local client that
    /// held block z, and `realized(i, z)` the instantaneous rate it got
    /// there. Updates fractions and average throughputs with the 1/k rule and
    /// returns each client's realized rate for the frame (Σ over its blocks).
    pub fn apply_frame(&mut self, assignment: &[usize], realized: impl Fn(usize, usize) -> f64) -> Vec<f64> {
        debug_assert_eq!(assignment.len(), self.num_blocks);
        let k = self.frames_elapsed + 1;
        let shrink = (k - 1) as f64 / k as f64;
        let inv_k = 1.0 / k as f64;
        let mut frame_rate = vec![0.0; self.num_clients];
        for v in self.phi.iter_mut() {
            *v *= shrink;
        }
        for (z, &i) in assignment.iter().enumerate() {
            self.phi[i * self.num_blocks + z] += inv_k;
            frame_rate[i] += realized(i, z);
        }
        for i in 0..self.num_clients {
            self.r[i] = shrink * self.r[i] + inv_k * frame_rate[i];
        }
        self.frames_elapsed = k;
        frame_rate
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("client {client} has zero rate on every block; Σ w·ln r is unbounded below")]
    ZeroRateClient { client: usize },
    #[error("oracle requires at least one client")]
    Empty,
}

/// Solution of the offline PF program.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    /// φ[i][z], one row per client; each block's column sums to 1.
    pub phi: Vec<Vec<f64>>,
    /// Optimal throughputs r_i = Σ_z φ_{i,z}·H_{i,z}.
    pub rates: Vec<f64>,
    /// Optimal Σ w_i ln r_i.
    pub pf_value: f64,
    /// Worst relative slack of the optimality condition
    /// w_i H_{i,z}/r_i = max_j w_j H_{j,z}/r_j over blocks where φ_{i,z} > 0.
    pub kkt_residual: f64,
}

/// Maximizes Σ_i w_i ln(Σ_z φ_{i,z} H_{i,z}) over per-block simplexes.
///
/// Projected gradient ascent with an adaptive step gets close; exact
/// per-block Lagrangian solves (coordinate ascent, each block solved to
/// machine precision by bisection on the block's multiplier) then polish the
/// solution — on two-client instances a sweep is the exhaustive per-block
/// refinement, and the same solve is exact for larger memberships too. The
/// program is concave with separable constraints, so the polish converges to
/// the global optimum; the returned KKT residual certifies it.
pub fn solve_schedule_oracle(weights: &[f64], rates: &[&[f64]]) -> Result<OracleSolution, OracleError> {
    let n = weights.len();
    if n == 0 || rates.len() != n {
        return Err(OracleError::Empty);
    }
    let nz = rates[0].len();
    for (i, row) in rates.iter().enumerate() {
        assert_eq!(row.len(), nz, "ragged rate matrix");
        if row.iter().all(|&h| h <= 0.0) {
            return Err(OracleError::ZeroRateClient { client: i });
        }
    }

    // Uniform start.
    let mut phi = vec![vec![1.0 / n as f64; nz]; n];
    let mut r: Vec<f64> = (0..n).map(|i| dot(&phi[i], rates[i])).collect();

    // Phase 1: projected gradient ascent with doubling/halving step control.
    let mut step = 1.0 / rates.iter().flat_map(|row| row.iter()).cloned().fold(1e-300, f64::max);
    let mut value = pf_value(weights, &r);
    for _ in 0..2000 {
        let mut cand = phi.clone();
        for i in 0..n {
            for z in 0..nz {
                cand[i][z] += step * weights[i] * rates[i][z] / r[i];
            }
        }
        for z in 0..nz {
            project_block_simplex(&mut cand, z);
        }
        let cand_r: Vec<f64> = (0..n).map(|i| dot(&cand[i], rates[i])).collect();
        let cand_value = pf_value(weights, &cand_r);
        if cand_value >= value {
            phi = cand;
            r = cand_r;
            let improved = cand_value - value > 1e-12 * (1.0 + value.abs());
            value = cand_value;
            step *= 2.0;
            if !improved && step < 1e-9 {
                break;
            }
        } else {
            step *= 0.5;
            if step < 1e-18 {
                break;
            }
        }
    }

    // Phase 2: exact per-block refinement sweeps.
    for _ in 0..10_000 {
        let before = pf_value(weights, &r);
        for z in 0..nz {
            solve_block_exact(weights, rates, &mut phi, &mut r, z);
        }
        let after = pf_value(weights, &r);
        if after - before <= 1e-14 * (1.0 + after.abs()) {
            break;
        }
    }

    let rates_final: Vec<f64> = (0..n).map(|i| dot(&phi[i], rates[i])).collect();
    let kkt_residual = kkt_residual(weights, rates, &phi, &rates_final);
    let pf = pf_value(weights, &rates_final);
    Ok(OracleSolution { phi, rates: rates_final, pf_value: pf, kkt_residual })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pf_value(weights: &[f64], r: &[f64]) -> f64 {
    weights.iter().zip(r).map(|(&w, &ri)| if ri > 0.0 { w * ri.ln() } else { f64::NEG_INFINITY }).sum()
}

/// Euclidean projection of one block's column onto the probability simplex.
fn project_block_simplex(phi: &mut [Vec<f64>], z: usize) {
    let n = phi.len();
    let mut v: Vec<f64> = (0..n).map(|i| phi[i][z]).collect();
    let mut sorted = v.clone();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
    let sum: f64 = v.iter().sum();
    for (i, x) in v.into_iter().enumerate() {
        phi[i][z] = x / sum;
    }
}

/// Exactly maximizes the objective in block z's column, holding the rest of
/// φ fixed. Stationarity gives φ_i = w_i/λ − A_i/H_i clipped at 0 (A_i is
/// client i's throughput from other blocks), and Σ_i φ_i = 1 pins λ by
/// bisection: the share sum is strictly decreasing in λ.
fn solve_block_exact(weights: &[f64], rates: &[&[f64]], phi: &mut [Vec<f64>], r: &mut [f64], z: usize) {
    let n = weights.len();
    let active: Vec<usize> = (0..n).filter(|&i| rates[i][z] > 0.0).collect();
    if active.is_empty() {
        return;
    }
    let a: Vec<f64> = (0..n).map(|i| (r[i] - phi[i][z] * rates[i][z]).max(0.0)).collect();
    let share_sum = |lambda: f64| -> f64 {
        active.iter().map(|&i| (weights[i] / lambda - a[i] / rates[i][z]).max(0.0)).sum::<f64>()
    };
    // λ_high: Σ shares ≤ 1 is guaranteed at Σ w; λ_low: some single share ≥ 1.
    let mut hi = active.iter().map(|&i| weights[i]).sum::<f64>();
    let mut lo = active
        .iter()
        .map(|&i| weights[i] * rates[i][z] / (a[i] + rates[i][z]))
        .fold(f64::INFINITY, f64::min);
    if lo >= hi {
        lo = hi * 0.5;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if share_sum(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let mut shares: Vec<f64> = (0..n).map(|_| 0.0).collect();
    let mut sum = 0.0;
    for &i in &active {
        let s = (weights[i] / lambda - a[i] / rates[i][z]).max(0.0);
        shares[i] = s;
        sum += s;
    }
    if sum <= 0.0 {
        // Degenerate (all shares clipped): give the block to the best marginal client.
        let best = *active
            .iter()
            .max_by(|&&p, &&q| {
                (weights[p] * rates[p][z] / a[p].max(1e-300))
                    .partial_cmp(&(weights[q] * rates[q][z] / a[q].max(1e-300)))
                    .unwrap()
            })
            .unwrap();
        shares[best] = 1.0;
        sum = 1.0;
    }
    for i in 0..n {
        let new = shares[i] / sum;
        phi[i][z] = new;
        r[i] = a[i] + new * rates[i][z];
    }
}

/// Worst relative optimality slack over supported (φ > 0) entries.
fn kkt_residual(weights: &[f64], rates: &[&[f64]], phi: &[Vec<f64>], r: &[f64]) -> f64 {
    let n = weights.len();
    let nz = rates[0].len();
    let mut worst = 0.0f64;
    for z in 0..nz {
        let m = (0..n).map(|i| weights[i] * rates[i][z] / r[i]).fold(0.0f64, f64::max);
        if m <= 0.0 {
            continue;
        }
        for i in 0..n {
            if phi[i][z] > 1e-9 {
                worst = worst.max((m - weights[i] * rates[i][z] / r[i]) / m);
            }
        }
    }
    worst
}

/// Runs the online PF policy on static rates for `frames` frames; returns the
/// final state. Used by the exact association estimator and the tests.
pub fn run_online_pf(weights: &[f64], rates: &[&[f64]], frames: u64) -> ScheduleState {
    let nz = rates.first().map_or(0, |r| r.len());
    let mut state = ScheduleState::cold_start(rates, nz);
    let mut assignment = vec![0usize; nz];
    for _ in 0..frames {
        for (z, slot) in assignment.iter_mut().enumerate() {
            *slot = state.pf_pick(weights, |i| rates[i][z]);
        }
        state.apply_frame(&assignment, |i, z| rates[i][z]);
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn rows(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(|r| r.as_slice()).collect()
    }

    #[test]
    fn pf_pick_argmax() {
        let rates = vec![vec![200.0, 50.0], vec![100.0, 100.0]];
        let rows: Vec<&[f64]> = rates.iter().map(|r| r.as_slice()).collect();
        let mut state = ScheduleState::cold_start(&rows, 2);
        state.r = vec![100.0, 100.0];
        // w·H/r = (1·200/100, 1·100/100) → client 0 wins block 0.
        assert_eq!(state.pf_pick(&[1.0, 1.0], |i| rates[i][0]), 0);
    }

    #[test]
    fn pf_pick_single_client_always_wins() {
        let rates = vec![vec![5.0; 4]];
        let rows: Vec<&[f64]> = rates.iter().map(|r| r.as_slice()).collect();
        let state = ScheduleState::cold_start(&rows, 4);
        for z in 0..4 {
            assert_eq!(state.pf_pick(&[2.0], |i| rates[i][z]), 0);
        }
    }

    #[test]
    fn pf_pick_tie_goes_to_lowest_id() {
        let rates = vec![vec![100.0], vec![100.0], vec![100.0]];
        let rows: Vec<&[f64]> = rates.iter().map(|r| r.as_slice()).collect();
        let mut state = ScheduleState::cold_start(&rows, 1);
        state.r = vec![50.0, 50.0, 50.0];
        for _ in 0..3 {
            assert_eq!(state.pf_pick(&[1.0, 1.0, 1.0], |i| rates[i][0]), 0);
        }
    }

    #[test]
    fn fraction_update_recursion() {
        // The (k−1)/k shrink makes φ the running mean of the allocation
        // indicators: history [1, 0, 1] → 2/3, complement [0, 1, 0] → 1/3.
        let rates = vec![vec![10.0], vec![10.0]];
        let rows: Vec<&[f64]> = rates.iter().map(|r| r.as_slice()).collect();
        let mut state = ScheduleState::cold_start(&rows, 1);
        state.apply_frame(&[0], |_, _| 10.0); // k=1: φ₀ = 1
        state.apply_frame(&[1], |_, _| 10.0); // k=2: φ₀ = 0.5, φ₁ = 0.5
        assert_relative_eq!(state.fraction(0, 0), 0.5);
        state.apply_frame(&[0], |_, _| 10.0); // k=3: φ₀ = (2·0.5 + 1)/3
        assert_relative_eq!(state.fraction(0, 0), 2.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(state.fraction(1, 0), 1.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn fractions_sum_to_one_per_block() {
        let mut rng = crate::rng::stream(3, crate::rng::tag::TEST, &[0]);
        let n = 3;
        let nz = 8;
        let rates: Vec<Vec<f64>> = (0..n).map(|_| (0..nz).map(|_| rng.gen_range(10.0..200.0)).collect()).collect();
        let state = run_online_pf(&[1.0, 2.0, 0.5], &rows(&rates), 500);
        for z in 0..nz {
            let sum: f64 = (0..n).map(|i| state.fraction(i, z)).sum();
            assert!((sum - 1.0).abs() < 1e-9, "block {z} fractions sum {sum}");
        }
    }

    #[test]
    fn avg_rate_matches_phi_weighted_static_rates() {
        let mut rng = crate::rng::stream(4, crate::rng::tag::TEST, &[1]);
        let rates: Vec<Vec<f64>> = (0..2).map(|_| (0..6).map(|_| rng.gen_range(10.0..200.0)).collect()).collect();
        let state = run_online_pf(&[1.0, 1.0], &rows(&rates), 400);
        for i in 0..2 {
            let from_phi: f64 = (0..6).map(|z| state.fraction(i, z) * rates[i][z]).sum();
            // The r recursion equals Σ φH up to the decayed cold-start seed.
            assert_relative_eq!(state.avg_rate(i), from_phi, max_relative = 1e-6);
        }
    }

    #[test]
    fn rr_rotation() {
        let rates = vec![vec![10.0; 2]; 2];
        let rows: Vec<&[f64]> = rates.iter().map(|r| r.as_slice()).collect();
        let mut state = ScheduleState::cold_start(&rows, 2);
        let mut picks = Vec::new();
        for _ in 0..6 {
            let p = state.rr_pick();
            picks.push(p);
            state.apply_frame(&[p, p], |i, z| rates[i][z]);
        }
        assert_eq!(picks, vec![0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn rr_single_client() {
        let rates = vec![vec![10.0; 2]];
        let rows: Vec<&[f64]> = rates.iter().map(|r| r.as_slice()).collect();
        let mut state = ScheduleState::cold_start(&rows, 2);
        for _ in 0..5 {
            assert_eq!(state.rr_pick(), 0);
            state.apply_frame(&[0, 0], |i, z| rates[i][z]);
        }
    }

    #[test]
    fn rr_equal_share_counts() {
        // Over 2n frames with n clients each client is scheduled exactly twice.
        let n = 5;
        let rates = vec![vec![10.0; 3]; n];
        let rows: Vec<&[f64]> = rates.iter().map(|r| r.as_slice()).collect();
        let mut state = ScheduleState::cold_start(&rows, 3);
        let mut counts = vec![0usize; n];
        for _ in 0..2 * n {
            let p = state.rr_pick();
            counts[p] += 1;
            state.apply_frame(&[p, p, p], |i, z| rates[i][z]);
        }
        assert!(counts.iter().all(|&c| c == 2));
    }

    #[test]
    fn oracle_two_clients_pick_their_better_blocks() {
        let (a, b): (&[f64], &[f64]) = (&[2.0, 1.0], &[1.0, 2.0]);
        let sol = solve_schedule_oracle(&[1.0, 1.0], &[a, b]).unwrap();
        assert_relative_eq!(sol.phi[0][0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(sol.phi[1][1], 1.0, epsilon = 1e-9);
        assert_relative_eq!(sol.pf_value, 2.0 * 2.0f64.ln(), max_relative = 1e-9);
        assert!(sol.kkt_residual < 1e-6);
    }

    #[test]
    fn oracle_single_client_takes_everything() {
        let row: &[f64] = &[4.0, 6.0, 1.0];
        let sol = solve_schedule_oracle(&[3.0], &[row]).unwrap();
        assert!(sol.phi[0].iter().all(|&p| (p - 1.0).abs() < 1e-12));
        assert_relative_eq!(sol.rates[0], 11.0, max_relative = 1e-12);
    }

    #[test]
    fn oracle_symmetric_clients_split_evenly() {
        let n = 4;
        let rates = vec![vec![7.0; 5]; n];
        let sol = solve_schedule_oracle(&vec![1.0; n], &rows(&rates)).unwrap();
        for i in 0..n {
            assert_relative_eq!(sol.rates[i], 35.0 / n as f64, max_relative = 1e-9);
        }
        assert!(sol.kkt_residual < 1e-6);
    }

    #[test]
    fn oracle_rejects_zero_rate_client() {
        let (a, b): (&[f64], &[f64]) = (&[1.0, 1.0], &[0.0, 0.0]);
        let err = solve_schedule_oracle(&[1.0, 1.0], &[a, b]);
        assert!(matches!(err, Err(OracleError::ZeroRateClient { client: 1 })));
    }

    #[test]
    fn online_pf_approaches_oracle_value() {
        // Theorem-1 style check on one awkward instance (the full 20-instance
        // sweep lives in the integration suite).
        let mut rng = crate::rng::stream(12, crate::rng::tag::TEST, &[7]);
        let n = 4;
        let nz = 12;
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let rates: Vec<Vec<f64>> = (0..n).map(|_| (0..nz).map(|_| rng.gen_range(5.0..500.0)).collect()).collect();
        let sol = solve_schedule_oracle(&weights, &rows(&rates)).unwrap();
        let state = run_online_pf(&weights, &rows(&rates), 10_000);
        let online: f64 = (0..n).map(|i| weights[i] * state.avg_rate(i).ln()).sum();
        assert!(
            (sol.pf_value - online) / sol.pf_value.abs() < 0.01,
            "online {online} more than 1% below oracle {}",
            sol.pf_value
        );
        assert!(online <= sol.pf_value + 1e-9, "online value cannot beat the optimum");
    }

    #[test]
    fn rr_and_pf_agree_on_equal_rates() {
        let n = 3;
        let nz = 4;
        let rates = vec![vec![50.0; nz]; n];
        let weights = vec![1.0; n];
        let pf = run_online_pf(&weights, &rows(&rates), 3000);
        let rows: Vec<&[f64]> = rates.iter().map(|r| r.as_slice()).collect();
        let mut rr = ScheduleState::cold_start(&rows, nz);
        for _ in 0..3000 {
            let p = rr.rr_pick();
            rr.apply_frame(&vec![p; nz], |i, z| rates[i][z]);
        }
        for i in 0..n {
            let ratio = pf.avg_rate(i) / rr.avg_rate(i);
            assert!((ratio - 1.0).abs() < 0.02, "client {i} PF/RR ratio {ratio}");
        }
    }
}
