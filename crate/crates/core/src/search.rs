//! Multistart damped-Newton search for cyclic `K`-state PR ensembles.
//!
//! A cycle `r_1 → r_2 → … → r_K → r_1` with rates `κ_j` solves the square
//! real system
//!
//! ```text
//!   |r_j|² − 1                           = 0
//!   A r_j + b − κ_j (r_{j+1} − r_j)      = 0      j = 1..K
//! ```
//!
//! in `4K` unknowns. Each start is an independent Newton run; the converged
//! points are filtered, merged up to cyclic relabeling and returned in a
//! canonical order so the result does not depend on thread scheduling.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use rayon::prelude::*;

use crate::bloch::BlochModel;
use crate::ensemble::{self, PREnsemble};
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_STARTS: usize = 2000;
/// Largest residual (rate-scaled units) of an accepted Newton solution.
pub const ACCEPT_RESIDUAL: f64 = 1e-10;
/// Smallest admissible cycle rate (rate-scaled units).
pub const MIN_RATE: f64 = 1e-8;
pub const NORM_TOLERANCE: f64 = 1e-8;
/// Two solutions closer than this (max-abs over aligned states) are merged.
pub const DEDUP_TOLERANCE: f64 = 1e-6;

const MAX_ITERATIONS: usize = 200;
const LM_ITERATIONS: usize = 500;
const TARGET_RESIDUAL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    pub n_starts: usize,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { n_starts: DEFAULT_STARTS, seed: 0 }
    }
}

/// Counters describing what happened to the starts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchDiagnostics {
    pub starts: usize,
    /// Newton runs that did not reach the residual target.
    pub not_converged: usize,
    /// Converged runs rejected for non-positive rates, non-unit or coincident states.
    pub rejected: usize,
    /// Accepted runs that duplicated an earlier solution.
    pub duplicates: usize,
}

#[derive(Debug, Clone)]
pub struct CyclicSearch {
    pub ensembles: Vec<PREnsemble>,
    pub diagnostics: SearchDiagnostics,
}

struct CycleSystem {
    a: nalgebra::Matrix3<f64>,
    b: Vector3<f64>,
    k: usize,
}

impl CycleSystem {
    fn state(&self, x: &DVector<f64>, j: usize) -> Vector3<f64> {
        Vector3::new(x[3 * j], x[3 * j + 1], x[3 * j + 2])
    }

    fn rate(&self, x: &DVector<f64>, j: usize) -> f64 {
        x[3 * self.k + j]
    }

    fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        let k = self.k;
        let mut f = DVector::zeros(4 * k);
        for j in 0..k {
            let r = self.state(x, j);
            let next = self.state(x, (j + 1) % k);
            f[4 * j] = r.norm_squared() - 1.0;
            let drift = self.a * r + self.b - (next - r) * self.rate(x, j);
            f.fixed_rows_mut::<3>(4 * j + 1).copy_from(&drift);
        }
        f
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let k = self.k;
        let mut jac = DMatrix::zeros(4 * k, 4 * k);
        for j in 0..k {
            let r = self.state(x, j);
            let n = (j + 1) % k;
            let next = self.state(x, n);
            let kappa = self.rate(x, j);
            for c in 0..3 {
                jac[(4 * j, 3 * j + c)] = 2.0 * r[c];
            }
            for row in 0..3 {
                for col in 0..3 {
                    jac[(4 * j + 1 + row, 3 * j + col)] = self.a[(row, col)] + if row == col { kappa } else { 0.0 };
                }
                jac[(4 * j + 1 + row, 3 * n + row)] -= kappa;
                jac[(4 * j + 1 + row, 3 * k + j)] = -(next[row] - r[row]);
            }
        }
        jac
    }

    /// Damped Newton: backtracking line search on `|F|₂`, falling back to
    /// Levenberg–Marquardt damping from the same start when the line search
    /// stalls or the iteration diverges.
    fn solve(&self, x0: DVector<f64>) -> Option<DVector<f64>> {
        self.newton(x0.clone()).or_else(|| self.levenberg_marquardt(x0))
    }

    fn newton(&self, mut x: DVector<f64>) -> Option<DVector<f64>> {
        let mut f = self.residual(&x);
        for _ in 0..MAX_ITERATIONS {
            if f.amax() < TARGET_RESIDUAL {
                break;
            }
            let step = self.jacobian(&x).lu().solve(&(-&f))?;
            if !step.iter().all(|s| s.is_finite()) {
                return None;
            }
            let norm = f.norm();
            let mut alpha = 1.0;
            loop {
                let trial = &x + &step * alpha;
                let ft = self.residual(&trial);
                if ft.norm() < (1.0 - 1e-4 * alpha) * norm {
                    x = trial;
                    f = ft;
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-10 {
                    return (f.amax() < ACCEPT_RESIDUAL).then_some(x);
                }
            }
            if x.amax() > 1e8 {
                return None;
            }
        }
        (f.amax() < ACCEPT_RESIDUAL).then_some(x)
    }

    fn levenberg_marquardt(&self, mut x: DVector<f64>) -> Option<DVector<f64>> {
        let n = x.len();
        let mut f = self.residual(&x);
        let mut jac = self.jacobian(&x);
        let mut normal = jac.transpose() * &jac;
        let mut mu = 1e-3 * normal.diagonal().amax().max(1e-12);
        let mut nu = 2.0;
        for _ in 0..LM_ITERATIONS {
            if f.amax() < TARGET_RESIDUAL {
                break;
            }
            let grad = jac.transpose() * &f;
            let mut damped = normal.clone();
            for i in 0..n {
                damped[(i, i)] += mu;
            }
            let step = damped.cholesky()?.solve(&(-&grad));
            let trial = &x + &step;
            let ft = self.residual(&trial);
            let predicted = step.dot(&(&step * mu - &grad));
            let gain = (f.norm_squared() - ft.norm_squared()) / predicted;
            if gain > 0.0 && predicted > 0.0 {
                x = trial;
                f = ft;
                jac = self.jacobian(&x);
                normal = jac.transpose() * &jac;
                mu *= (1.0f64 / 3.0).max(1.0 - (2.0 * gain - 1.0).powi(3));
                nu = 2.0;
            } else {
                mu *= nu;
                nu *= 2.0;
                if !mu.is_finite() || mu > 1e30 {
                    break;
                }
            }
            if x.amax() > 1e8 {
                return None;
            }
        }
        // Newton polish from the LM point.
        if f.amax() < 1e-6 {
            return self.newton(x);
        }
        None
    }
}

fn random_unit_vector(rng: &mut impl Rng) -> Vector3<f64> {
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let s = (1.0 - z * z).sqrt();
    Vector3::new(s * phi.cos(), s * phi.sin(), z)
}

enum StartOutcome {
    NotConverged,
    Rejected,
    Solution(Vec<Vector3<f64>>, Vec<f64>),
}

/// Finds cyclic `K`-state PR ensembles of `bloch` (`K ≥ 3`).
pub fn cyclic_k_state_search(bloch: &BlochModel, k: usize, options: SearchOptions) -> Result<CyclicSearch> {
    if k < 3 {
        return Err(Error::Precondition(format!("cyclic search needs K ≥ 3, got {k}")));
    }
    ensemble::mixed_steady_state(bloch)?;
    let scale = bloch.rate_scale();
    let system = CycleSystem { a: bloch.a / scale, b: bloch.b / scale, k };

    let outcomes: Vec<StartOutcome> = (0..options.n_starts)
        .into_par_iter()
        .map(|start| {
            let mut rng = rng::stream(options.seed, start as u64);
            let mut x0 = DVector::zeros(4 * k);
            for j in 0..k {
                x0.fixed_rows_mut::<3>(3 * j).copy_from(&random_unit_vector(&mut rng));
            }
            for j in 0..k {
                x0[3 * k + j] = 10f64.powf(rng.random_range(-2.0..2.0));
            }
            let Some(x) = system.solve(x0) else {
                return StartOutcome::NotConverged;
            };
            let states: Vec<Vector3<f64>> = (0..k).map(|j| system.state(&x, j)).collect();
            let rates: Vec<f64> = (0..k).map(|j| system.rate(&x, j)).collect();
            let unit = states.iter().all(|r| (r.norm() - 1.0).abs() <= NORM_TOLERANCE);
            let collapsed = (0..k).any(|i| (i + 1..k).any(|j| (states[i] - states[j]).amax() < DEDUP_TOLERANCE));
            if !unit || collapsed || rates.iter().any(|&r| r <= MIN_RATE) {
                return StartOutcome::Rejected;
            }
            StartOutcome::Solution(states, rates.into_iter().map(|r| r * scale).collect())
        })
        .collect();

    let mut diagnostics = SearchDiagnostics { starts: options.n_starts, ..Default::default() };
    let mut unique: Vec<(Vec<Vector3<f64>>, Vec<f64>)> = Vec::new();
    for outcome in outcomes {
        match outcome {
            StartOutcome::NotConverged => diagnostics.not_converged += 1,
            StartOutcome::Rejected => diagnostics.rejected += 1,
            StartOutcome::Solution(states, rates) => {
                if unique.iter().any(|(u, _)| cyclic_distance(u, &states) < DEDUP_TOLERANCE) {
                    diagnostics.duplicates += 1;
                } else {
                    unique.push((states, rates));
                }
            }
        }
    }

    let tol = ensemble::default_pr_tolerance(bloch);
    let mut ensembles = Vec::with_capacity(unique.len());
    for (states, cycle_rates) in unique {
        let ens = build_cycle_ensemble(bloch, states, &cycle_rates)?;
        let check = ensemble::check_pr(bloch, &ens.states, tol)?;
        if !check.feasible {
            diagnostics.rejected += 1;
            continue;
        }
        ensembles.push(ens);
    }
    ensembles.sort_by(canonical_order);
    Ok(CyclicSearch { ensembles, diagnostics })
}

/// Smallest max-abs distance between `a` and any cyclic relabeling of `b`.
pub fn cyclic_distance(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let k = a.len();
    (0..k)
        .map(|rot| (0..k).map(|j| (a[j] - b[(j + rot) % k]).amax()).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

fn build_cycle_ensemble(bloch: &BlochModel, states: Vec<Vector3<f64>>, cycle_rates: &[f64]) -> Result<PREnsemble> {
    let k = states.len();
    let mut rates = DMatrix::zeros(k, k);
    for j in 0..k {
        rates[(j, (j + 1) % k)] = cycle_rates[j];
    }
    let probs = ensemble::stationary_probs_from_rates(&rates)?;

    // Start the cycle at the most occupied state.
    let first = (0..k).max_by(|&i, &j| probs[i].total_cmp(&probs[j])).unwrap_or(0);
    let rotate = |v: &[f64]| (0..k).map(|j| v[(j + first) % k]).collect::<Vec<_>>();
    let states: Vec<Vector3<f64>> = (0..k).map(|j| states[(j + first) % k]).collect();
    let cycle = rotate(cycle_rates);
    let probs = rotate(&probs);
    let mut rates = DMatrix::zeros(k, k);
    for j in 0..k {
        rates[(j, (j + 1) % k)] = cycle[j];
    }
    let residual = ensemble::pr_residual(bloch, &states, &rates);
    let entropy_bits = ensemble::shannon_entropy(&probs)?;
    Ok(PREnsemble { states, probs, rates, entropy_bits, residual, eigenvalue: None })
}

fn canonical_order(a: &PREnsemble, b: &PREnsemble) -> Ordering {
    if (a.entropy_bits - b.entropy_bits).abs() > 1e-9 {
        return a.entropy_bits.total_cmp(&b.entropy_bits);
    }
    for (ra, rb) in a.states.iter().zip(&b.states) {
        for c in 0..3 {
            if (ra[c] - rb[c]).abs() > 1e-9 {
                return ra[c].total_cmp(&rb[c]);
            }
        }
    }
    Ordering::Equal
}
