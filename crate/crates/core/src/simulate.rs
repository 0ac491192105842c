//! Quantum-jump trajectories with a classical memory of `K` states.
//!
//! The stepped path propagates the conditioned state with `exp(−i H_eff^k dt)`,
//! renormalizes it, and jumps with probability `‖(c + β^k)ψ‖² dt` per step. It
//! measures how far the state strays from its nominal `|φ_k⟩` instead of
//! assuming it stays put. Once a scheme has been validated the memory is a
//! plain continuous-time Markov chain, which the exact path samples directly
//! with exponential dwell times.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::Vector3;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bloch::bloch_components;
use crate::error::{Error, Result};
use crate::lindblad::{effective_hamiltonian, MasterEquation};
use crate::linalg::{self, re, CMatrix, CVector, I};
use crate::rng::{self, StreamRng};
use crate::stats;
use crate::unravel::AdaptiveScheme;

/// Largest allowed Bloch distance between the conditioned state and `|φ_k⟩`.
pub const CONFINEMENT_TOLERANCE: f64 = 1e-6;
/// Default step: total jump rate × dt ≤ this.
pub const MAX_RATE_STEP: f64 = 1e-3;
const BOOTSTRAP_REPLICATES: usize = 400;
const BOOTSTRAP_BLOCKS: usize = 100;
const BOOTSTRAP_SEED: u64 = 0x0b5e_55ed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    pub memory: usize,
    pub dwell: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    /// Number of memory states.
    pub k: usize,
    pub segments: Vec<Segment>,
    pub jump_count: usize,
    pub total_time: f64,
    /// Largest Bloch distance between the conditioned state and its nominal
    /// memory state; `None` for plain unravellings, which have no nominal states.
    pub max_state_deviation: Option<f64>,
    /// Distinct conditioned states at the requested resolution, if counted.
    pub distinct_states: Option<usize>,
}

impl TrajectoryRecord {
    /// Dwell times of completed visits to memory state `k` (the final,
    /// censored segment is excluded).
    pub fn dwell_samples(&self, k: usize) -> Vec<f64> {
        let completed = self.segments.len().min(self.jump_count);
        self.segments[..completed].iter().filter(|s| s.memory == k).map(|s| s.dwell).collect()
    }

    /// CSV with columns `time,memory_state,event`; one row per jump plus a final `end` row.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "time,memory_state,event")?;
        let mut t = 0.0;
        let completed = self.segments.len().min(self.jump_count);
        for (i, seg) in self.segments.iter().enumerate() {
            t += seg.dwell;
            let event = if i < completed { "jump" } else { "end" };
            writeln!(w, "{:.16e},{},{}", t, seg.memory, event)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    pub t_final: f64,
    pub dt: f64,
    pub seed: u64,
    /// Bloch-distance resolution for counting distinct visited states.
    pub resolution: Option<f64>,
}

impl SimulationOptions {
    pub fn new(t_final: f64, dt: f64, seed: u64) -> Self {
        Self { t_final, dt, seed, resolution: None }
    }

    pub fn counting(mut self, resolution: f64) -> Self {
        self.resolution = Some(resolution);
        self
    }
}

/// Step satisfying `rate · dt ≤ 1e-3` for the fastest jump channel of the scheme.
pub fn default_dt(scheme: &AdaptiveScheme) -> f64 {
    let max_rate = scheme
        .jump_ops
        .iter()
        .flat_map(|j| linalg::hermitian_eigenvalues(&(j.adjoint() * j)))
        .fold(0.0f64, f64::max);
    if max_rate > 0.0 {
        MAX_RATE_STEP / max_rate
    } else {
        MAX_RATE_STEP
    }
}

/// Greedy clustering of Bloch vectors: a point is new if no earlier
/// representative lies within `delta`. Cells of side `delta` make the lookup local.
#[derive(Debug)]
pub struct VisitCounter {
    delta: f64,
    cells: HashMap<[i64; 3], Vec<Vector3<f64>>>,
    count: usize,
}

impl VisitCounter {
    pub fn new(delta: f64) -> Self {
        Self { delta, cells: HashMap::new(), count: 0 }
    }

    fn cell(&self, r: &Vector3<f64>) -> [i64; 3] {
        [(r.x / self.delta).floor() as i64, (r.y / self.delta).floor() as i64, (r.z / self.delta).floor() as i64]
    }

    pub fn insert(&mut self, r: Vector3<f64>) {
        let [i, j, k] = self.cell(&r);
        for di in -1..=1 {
            for dj in -1..=1 {
                for dk in -1..=1 {
                    if let Some(reps) = self.cells.get(&[i + di, j + dj, k + dk]) {
                        if reps.iter().any(|q| (q - r).norm() <= self.delta) {
                            return;
                        }
                    }
                }
            }
        }
        self.cells.entry([i, j, k]).or_default().push(r);
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

/// Fixed-step jump integrator. Memory `k` jumps through one of `channels[k]`
/// and then moves to `(k + 1) mod K`.
struct Stepper {
    propagators: Vec<CMatrix>,
    channels: Vec<Vec<CMatrix>>,
    dt: f64,
    n_steps: usize,
}

struct RunSummary {
    segments: Vec<Segment>,
    jumps: usize,
}

impl Stepper {
    fn new(eff_hams: &[CMatrix], channels: Vec<Vec<CMatrix>>, t_final: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !(t_final >= 0.0) {
            return Err(Error::Precondition(format!("need dt > 0 and t_final ≥ 0, got dt = {dt}, t_final = {t_final}")));
        }
        let n_steps = (t_final / dt).round().max(if t_final > 0.0 { 1.0 } else { 0.0 }) as usize;
        let dt = if n_steps > 0 { t_final / n_steps as f64 } else { dt };
        let propagators = eff_hams.iter().map(|h| (h * (-I * dt)).exp()).collect();
        Ok(Self { propagators, channels, dt, n_steps })
    }

    fn k(&self) -> usize {
        self.channels.len()
    }

    /// Runs one trajectory; `observe(step, ψ, memory)` sees the state after
    /// every step, and once before the first.
    fn run(
        &self,
        psi0: &CVector,
        rng: &mut StreamRng,
        mut observe: impl FnMut(usize, &CVector, usize) -> Result<()>,
    ) -> Result<RunSummary> {
        let mut psi = psi0.clone();
        let mut kicked = CVector::zeros(psi.len());
        let mut memory = 0;
        let mut segment_start = 0;
        let mut segments = Vec::new();
        let mut jumps = 0;
        observe(0, &psi, memory)?;
        for step in 1..=self.n_steps {
            let u: f64 = rng.random();
            let mut cumulative = 0.0;
            let mut fired = false;
            for op in &self.channels[memory] {
                kicked.gemv(re(1.0), op, &psi, re(0.0));
                let p = kicked.norm_squared() * self.dt;
                cumulative += p;
                if u < cumulative {
                    fired = true;
                    break;
                }
            }
            if cumulative > 1.0 {
                return Err(Error::Precondition(format!("time step too large: jump probability {cumulative} per step")));
            }
            if fired {
                segments.push(Segment { memory, dwell: (step - segment_start) as f64 * self.dt });
                segment_start = step;
                memory = (memory + 1) % self.k();
                jumps += 1;
            } else {
                kicked.gemv(re(1.0), &self.propagators[memory], &psi, re(0.0));
            }
            let norm = kicked.norm();
            if !(norm > 0.0) {
                return Err(Error::Numerical(format!("conditioned state vanished at step {step}")));
            }
            psi.copy_from(&kicked);
            psi.unscale_mut(norm);
            observe(step, &psi, memory)?;
        }
        if self.n_steps > segment_start {
            segments.push(Segment { memory, dwell: (self.n_steps - segment_start) as f64 * self.dt });
        }
        Ok(RunSummary { segments, jumps })
    }
}

fn check_scheme(me: &MasterEquation, scheme: &AdaptiveScheme) -> Result<()> {
    if scheme.k() < 1 || scheme.jump_ops.len() != scheme.k() || scheme.eff_hams.len() != scheme.k() {
        return Err(Error::InvalidModel("adaptive scheme is incomplete".into()));
    }
    for m in scheme.jump_ops.iter().chain(&scheme.eff_hams) {
        if m.nrows() != me.dim() || m.ncols() != me.dim() {
            return Err(Error::DimensionMismatch { expected: me.dim(), got: m.nrows() });
        }
    }
    Ok(())
}

/// `2 ‖ψ − ⟨φ|ψ⟩φ‖`: the Bloch distance between two pure qubit states, and
/// twice the trace distance between pure states in general.
fn state_distance(psi: &CVector, phi: &CVector) -> f64 {
    2.0 * linalg::orthogonal_residual(psi, phi).norm()
}

fn counter_for(me: &MasterEquation, resolution: Option<f64>) -> Result<Option<VisitCounter>> {
    match resolution {
        Some(_) if me.dim() != 2 => Err(Error::UnsupportedDimension(me.dim())),
        Some(delta) if !(delta > 0.0) => Err(Error::Precondition(format!("resolution must be positive, got {delta}"))),
        Some(delta) => Ok(Some(VisitCounter::new(delta))),
        None => Ok(None),
    }
}

/// Stepped simulation of the adaptive scheme, starting in `|φ_0⟩`.
pub fn simulate_adaptive(me: &MasterEquation, scheme: &AdaptiveScheme, opts: &SimulationOptions) -> Result<TrajectoryRecord> {
    check_scheme(me, scheme)?;
    let channels = scheme.jump_ops.iter().map(|j| vec![j.clone()]).collect();
    let stepper = Stepper::new(&scheme.eff_hams, channels, opts.t_final, opts.dt)?;
    let mut counter = counter_for(me, opts.resolution)?;
    let mut rng = rng::stream(opts.seed, 0);
    let mut worst = 0.0f64;
    let summary = stepper.run(&scheme.cycle[0], &mut rng, |step, psi, memory| {
        let deviation = state_distance(psi, &scheme.cycle[memory]);
        worst = worst.max(deviation);
        if deviation > CONFINEMENT_TOLERANCE {
            return Err(Error::ConfinementViolation { time: step as f64 * stepper.dt, deviation });
        }
        if let Some(c) = counter.as_mut() {
            c.insert(bloch_components(&linalg::projector(psi)));
        }
        Ok(())
    })?;
    Ok(TrajectoryRecord {
        k: scheme.k(),
        segments: summary.segments,
        jump_count: summary.jumps,
        total_time: opts.t_final,
        max_state_deviation: Some(worst),
        distinct_states: counter.map(|c| c.count()),
    })
}

/// Exact simulation of the memory chain of a validated scheme: dwell times in
/// memory `k` are exponential with rate `|b_k|²`. The conditioned state is
/// `|φ_k⟩` by construction, so the recorded deviation is zero.
pub fn simulate_adaptive_exact(scheme: &AdaptiveScheme, t_final: f64, seed: u64) -> Result<TrajectoryRecord> {
    if !(t_final >= 0.0) {
        return Err(Error::Precondition(format!("t_final must be ≥ 0, got {t_final}")));
    }
    let mut rng = rng::stream(seed, 0);
    let (segments, jump_count) = memory_path(&scheme.jump_rates, t_final, &mut rng);
    Ok(TrajectoryRecord {
        k: scheme.k(),
        segments,
        jump_count,
        total_time: t_final,
        max_state_deviation: Some(0.0),
        distinct_states: None,
    })
}

fn exponential(rate: f64, rng: &mut StreamRng) -> f64 {
    if rate <= 0.0 {
        return f64::INFINITY;
    }
    // 1 − u ∈ (0, 1] keeps the logarithm finite.
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

fn memory_path(rates: &[f64], t_final: f64, rng: &mut StreamRng) -> (Vec<Segment>, usize) {
    let k = rates.len();
    let mut t = 0.0;
    let mut memory = 0;
    let mut segments = Vec::new();
    let mut jumps = 0;
    while t < t_final {
        let dwell = exponential(rates[memory], rng);
        if t + dwell >= t_final {
            segments.push(Segment { memory, dwell: t_final - t });
            break;
        }
        segments.push(Segment { memory, dwell });
        t += dwell;
        memory = (memory + 1) % k;
        jumps += 1;
    }
    (segments, jumps)
}

/// Stepped simulation of the unmodified unravelling (`β = 0`, one detector per
/// jump operator) from `initial`. The record has a single memory state; it
/// is split into segments at each jump.
pub fn simulate_plain(me: &MasterEquation, initial: &CVector, opts: &SimulationOptions) -> Result<TrajectoryRecord> {
    if initial.len() != me.dim() {
        return Err(Error::DimensionMismatch { expected: me.dim(), got: initial.len() });
    }
    let stepper = plain_stepper(me, opts.t_final, opts.dt)?;
    let mut counter = counter_for(me, opts.resolution)?;
    let mut rng = rng::stream(opts.seed, 0);
    let summary = stepper.run(&linalg::normalized(initial), &mut rng, |_, psi, _| {
        if let Some(c) = counter.as_mut() {
            c.insert(bloch_components(&linalg::projector(psi)));
        }
        Ok(())
    })?;
    Ok(TrajectoryRecord {
        k: 1,
        segments: summary.segments,
        jump_count: summary.jumps,
        total_time: opts.t_final,
        max_state_deviation: None,
        distinct_states: counter.map(|c| c.count()),
    })
}

fn plain_stepper(me: &MasterEquation, t_final: f64, dt: f64) -> Result<Stepper> {
    Stepper::new(&[effective_hamiltonian(me)], vec![me.jump_ops().to_vec()], t_final, dt)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupationStats {
    pub empirical_probs: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_jumps: usize,
    pub total_time: f64,
}

/// Time-weighted memory occupations; standard errors come from a bootstrap
/// over blocks of consecutive segments.
pub fn occupation_stats(record: &TrajectoryRecord) -> Result<OccupationStats> {
    let total: f64 = record.segments.iter().map(|s| s.dwell).sum();
    if !(total > 0.0) || record.k == 0 {
        return Err(Error::Precondition("occupation statistics need a record with positive duration".into()));
    }
    let mut probs = vec![0.0; record.k];
    for s in &record.segments {
        probs[s.memory] += s.dwell;
    }
    probs.iter_mut().for_each(|p| *p /= total);
    let n = record.segments.len();
    let block_len = n.div_ceil(BOOTSTRAP_BLOCKS).max(record.k);
    let mut numerators = Vec::new();
    let mut denominators = Vec::new();
    for chunk in record.segments.chunks(block_len) {
        let mut num = vec![0.0; record.k];
        for s in chunk {
            num[s.memory] += s.dwell;
        }
        denominators.push(chunk.iter().map(|s| s.dwell).sum());
        numerators.push(num);
    }
    let mut rng = rng::stream(BOOTSTRAP_SEED, 0);
    let stderr = stats::block_bootstrap_ratio(&numerators, &denominators, BOOTSTRAP_REPLICATES, &mut rng);
    Ok(OccupationStats { empirical_probs: probs, stderr, n_jumps: record.jump_count, total_time: total })
}

/// `Σ_k p_k |φ_k⟩⟨φ_k|`.
pub fn mixture(scheme: &AdaptiveScheme, probs: &[f64]) -> CMatrix {
    let d = scheme.cycle[0].len();
    scheme.cycle.iter().zip(probs).fold(CMatrix::zeros(d, d), |acc, (phi, &p)| acc + linalg::projector(phi) * re(p))
}

fn check_grid(t_grid: &[f64], n_traj: usize) -> Result<()> {
    if n_traj == 0 {
        return Err(Error::Precondition("need at least one trajectory".into()));
    }
    if t_grid.iter().any(|t| !(*t >= 0.0)) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Precondition("time grid must be non-negative and ascending".into()));
    }
    Ok(())
}

/// Mean of `|ψ(t)⟩⟨ψ(t)|` over `n_traj` adaptive trajectories started in `|φ_0⟩`,
/// using the exact memory-chain sampler. Trajectory `i` uses stream `i`.
pub fn ensemble_average(
    me: &MasterEquation,
    scheme: &AdaptiveScheme,
    n_traj: usize,
    t_grid: &[f64],
    seed: u64,
) -> Result<Vec<CMatrix>> {
    check_scheme(me, scheme)?;
    check_grid(t_grid, n_traj)?;
    let t_final = t_grid.last().copied().unwrap_or(0.0);
    let paths: Vec<Vec<usize>> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i as u64);
            let (segments, _) = memory_path(&scheme.jump_rates, t_final, &mut rng);
            memory_on_grid(&segments, t_grid)
        })
        .collect();
    let mut counts = vec![vec![0usize; scheme.k()]; t_grid.len()];
    for path in &paths {
        for (g, &m) in path.iter().enumerate() {
            counts[g][m] += 1;
        }
    }
    let projectors: Vec<CMatrix> = scheme.cycle.iter().map(linalg::projector).collect();
    Ok(counts
        .iter()
        .map(|row| {
            row.iter()
                .zip(&projectors)
                .fold(CMatrix::zeros(me.dim(), me.dim()), |acc, (&n, p)| acc + p * re(n as f64 / n_traj as f64))
        })
        .collect())
}

fn memory_on_grid(segments: &[Segment], t_grid: &[f64]) -> Vec<usize> {
    let mut out = Vec::with_capacity(t_grid.len());
    let mut idx = 0;
    let mut end = segments.first().map_or(0.0, |s| s.dwell);
    for &t in t_grid {
        // Half-open segments [start, end); the last one also covers t_final.
        while t >= end && idx + 1 < segments.len() {
            idx += 1;
            end += segments[idx].dwell;
        }
        out.push(segments.get(idx).map_or(0, |s| s.memory));
    }
    out
}

/// Stepped counterpart of [`ensemble_average`]; grid times are rounded to the nearest step.
pub fn ensemble_average_stepped(
    me: &MasterEquation,
    scheme: &AdaptiveScheme,
    n_traj: usize,
    t_grid: &[f64],
    dt: f64,
    seed: u64,
) -> Result<Vec<CMatrix>> {
    check_scheme(me, scheme)?;
    let channels = scheme.jump_ops.iter().map(|j| vec![j.clone()]).collect();
    check_grid(t_grid, n_traj)?;
    let stepper = Stepper::new(&scheme.eff_hams, channels, t_grid.last().copied().unwrap_or(0.0), dt)?;
    stepped_average(&stepper, &scheme.cycle[0], n_traj, t_grid, seed)
}

/// Mean of `|ψ(t)⟩⟨ψ(t)|` over plain (`β = 0`) trajectories from `initial`.
pub fn ensemble_average_plain(
    me: &MasterEquation,
    initial: &CVector,
    n_traj: usize,
    t_grid: &[f64],
    dt: f64,
    seed: u64,
) -> Result<Vec<CMatrix>> {
    if initial.len() != me.dim() {
        return Err(Error::DimensionMismatch { expected: me.dim(), got: initial.len() });
    }
    check_grid(t_grid, n_traj)?;
    let stepper = plain_stepper(me, t_grid.last().copied().unwrap_or(0.0), dt)?;
    stepped_average(&stepper, &linalg::normalized(initial), n_traj, t_grid, seed)
}

fn stepped_average(stepper: &Stepper, psi0: &CVector, n_traj: usize, t_grid: &[f64], seed: u64) -> Result<Vec<CMatrix>> {
    let d = psi0.len();
    let grid_steps: Vec<usize> = t_grid
        .iter()
        .map(|&t| if stepper.n_steps == 0 { 0 } else { ((t / stepper.dt).round() as usize).min(stepper.n_steps) })
        .collect();
    let per_traj: Vec<Result<Vec<CMatrix>>> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i as u64);
            let mut samples = vec![CMatrix::zeros(d, d); t_grid.len()];
            let mut next = 0;
            stepper.run(psi0, &mut rng, |step, psi, _| {
                while next < grid_steps.len() && grid_steps[next] == step {
                    samples[next] = linalg::projector(psi);
                    next += 1;
                }
                Ok(())
            })?;
            Ok(samples)
        })
        .collect();
    let mut sum = vec![CMatrix::zeros(d, d); t_grid.len()];
    for traj in per_traj {
        for (acc, m) in sum.iter_mut().zip(traj?) {
            *acc += m;
        }
    }
    Ok(sum.into_iter().map(|m| m / re(n_traj as f64)).collect())
}
