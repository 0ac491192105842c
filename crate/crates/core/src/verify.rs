//! End-to-end acceptance checks, shared by the test suite and the `verify`
//! command. Each check reports what it measured next to its verdict.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use nalgebra::Vector3;
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bloch::{density_to_bloch, to_bloch, BlochModel};
use crate::ensemble::{check_pr, dof_count, stationary_probs_from_rates, two_state_qubit_ensembles, PREnsemble};
use crate::error::{Error, Result};
use crate::fluorescence::{default_epsilon_grid, fluorescence_at};
use crate::lindblad::{integrate_me_on_grid, steady_state, von_neumann_entropy, DensityMatrix, MasterEquation};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::rng;
use crate::search::{cyclic_k_state_search, CyclicSearch, SearchOptions};
use crate::simulate::{
    default_dt, ensemble_average, ensemble_average_plain, occupation_stats, simulate_adaptive, simulate_plain,
    SimulationOptions,
};
use crate::unravel::{scheme_for_ensemble, AdaptiveScheme};

pub const CRITERIA: [u8; 11] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub gamma: f64,
    pub seed: u64,
    pub n_starts: usize,
    /// Multiplies every numerical tolerance; values below 1 tighten the checks.
    pub tolerance_scale: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { gamma: 1.0, seed: 1, n_starts: 2000, tolerance_scale: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    pub measured: Value,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "criterion {:>2} [{verdict}] {} ({:.1} s): {}", self.id, self.title, self.seconds, self.detail)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub all_passed: bool,
    pub gamma: f64,
    pub seed: u64,
    pub n_starts: usize,
    pub tolerance_scale: f64,
    pub criteria: Vec<CriterionReport>,
}

type SearchSlot = Arc<OnceLock<std::result::Result<Arc<CyclicSearch>, String>>>;

/// Runs the checks, caching cyclic searches shared between them.
pub struct Suite {
    config: VerifyConfig,
    searches: Mutex<HashMap<(u64, u64), SearchSlot>>,
}

struct Outcome {
    passed: bool,
    measured: Value,
    detail: String,
}

impl Suite {
    pub fn new(config: VerifyConfig) -> Self {
        Self { config, searches: Mutex::new(HashMap::new()) }
    }

    pub fn config(&self) -> &VerifyConfig {
        &self.config
    }

    fn tol(&self, base: f64) -> f64 {
        base * self.config.tolerance_scale
    }

    fn model(&self, eps: f64) -> Result<(MasterEquation, BlochModel)> {
        let me = fluorescence_at(self.config.gamma, eps)?;
        let bloch = to_bloch(&me)?;
        Ok((me, bloch))
    }

    /// Three-state cyclic solutions at power `eps`, computed once per seed.
    pub fn three_state(&self, eps: f64, seed: u64) -> Result<Arc<CyclicSearch>> {
        let slot = {
            let mut map = self.searches.lock().expect("search cache lock");
            map.entry((eps.to_bits(), seed)).or_default().clone()
        };
        slot.get_or_init(|| {
            let (_, bloch) = self.model(eps).map_err(|e| e.to_string())?;
            cyclic_k_state_search(&bloch, 3, SearchOptions { n_starts: self.config.n_starts, seed })
                .map(Arc::new)
                .map_err(|e| e.to_string())
        })
        .clone()
        .map_err(Error::Numerical)
    }

    pub fn run(&self, id: u8) -> CriterionReport {
        let start = Instant::now();
        let (title, outcome) = match id {
            1 => ("one-bit theorem on random qubit models", self.c1()),
            2 => ("v1 family has equal weights and one bit", self.c2()),
            3 => ("existence thresholds and solution counts", self.c3()),
            4 => ("small-drive entropy gap is cubic", self.c4()),
            5 => ("weak-drive entropy limits", self.c5()),
            6 => ("entropy bound h ≥ S(ρ_ss)", self.c6()),
            7 => ("back-out closes every cycle", self.c7()),
            8 => ("Monte Carlo confinement and occupations", self.c8()),
            9 => ("trajectory averages follow the master equation", self.c9()),
            10 => ("adaptive vs plain visited-state counts", self.c10()),
            11 => ("degree-of-freedom boundary", self.c11()),
            _ => ("unknown criterion", Err(Error::Precondition(format!("no criterion {id}")))),
        };
        let seconds = start.elapsed().as_secs_f64();
        let outcome = outcome.unwrap_or_else(|e| Outcome { passed: false, measured: Value::Null, detail: format!("error: {e}") });
        let limit = match id {
            1 => Some(60.0),
            3 => Some(600.0),
            8 => Some(120.0),
            _ => None,
        };
        let (passed, detail) = match limit {
            Some(l) if seconds >= l => (false, format!("{} [runtime {seconds:.1} s exceeds {l} s]", outcome.detail)),
            _ => (outcome.passed, outcome.detail),
        };
        CriterionReport { id, title: title.into(), passed, measured: outcome.measured, detail, seconds }
    }

    pub fn run_all(&self) -> VerifyReport {
        let criteria: Vec<CriterionReport> = CRITERIA.iter().map(|&id| self.run(id)).collect();
        VerifyReport {
            all_passed: criteria.iter().all(|c| c.passed),
            gamma: self.config.gamma,
            seed: self.config.seed,
            n_starts: self.config.n_starts,
            tolerance_scale: self.config.tolerance_scale,
            criteria,
        }
    }

    fn c1(&self) -> Result<Outcome> {
        let models = random_qubit_models(200, self.config.seed)?;
        let tol = self.tol(1e-8);
        let mut worst_residual = 0.0f64;
        let mut worst_mixture = 0.0f64;
        let mut fewest = usize::MAX;
        for bloch in &models {
            let rss = bloch.steady_state()?;
            let ens = two_state_qubit_ensembles(bloch)?;
            fewest = fewest.min(ens.len());
            for e in &ens {
                worst_residual = worst_residual.max(check_pr(bloch, &e.states, tol)?.residual);
                worst_mixture = worst_mixture.max((e.mixture() - rss).amax());
            }
        }
        Ok(Outcome {
            passed: fewest >= 1 && worst_residual < tol && worst_mixture < tol,
            measured: json!({ "models": models.len(), "fewest_ensembles": fewest, "max_residual": worst_residual, "max_mixture_error": worst_mixture }),
            detail: format!("{} models, ≥{fewest} ensembles each, residual ≤ {worst_residual:.2e}, mixture error ≤ {worst_mixture:.2e} (tol {tol:.0e})", models.len()),
        })
    }

    fn c2(&self) -> Result<Outcome> {
        let tol = self.tol(1e-10);
        let mut worst_p = 0.0f64;
        let mut worst_h = 0.0f64;
        let grid = default_epsilon_grid();
        for &eps in &grid {
            let (_, bloch) = self.model(eps)?;
            let v1 = v1_ensemble(&bloch)?;
            worst_p = worst_p.max(v1.probs.iter().map(|p| (p - 0.5).abs()).fold(0.0, f64::max));
            worst_h = worst_h.max((v1.entropy_bits - 1.0).abs());
        }
        Ok(Outcome {
            passed: worst_p < tol && worst_h < tol,
            measured: json!({ "grid_points": grid.len(), "max_weight_error": worst_p, "max_entropy_error": worst_h }),
            detail: format!("{} grid points, |wp − ½| ≤ {worst_p:.1e}, |h − 1| ≤ {worst_h:.1e} (tol {tol:.0e})", grid.len()),
        })
    }

    fn c3(&self) -> Result<Outcome> {
        let count_v = |eps: f64| -> Result<usize> {
            let (_, bloch) = self.model(eps)?;
            Ok(two_state_qubit_ensembles(&bloch)?.len())
        };
        let below = count_v(0.0624)?;
        let above = count_v(0.0626)?;
        let expected = [(0.07, 2usize), (0.05, 6), (0.02, 8), (0.09, 0)];
        let seeds: Vec<u64> = (0..3).map(|i| self.config.seed + i).collect();
        let mut counts = Vec::new();
        let mut ok = below == 3 && above == 1;
        for &(eps, want) in &expected {
            let per_seed: Vec<usize> =
                seeds.iter().map(|&s| self.three_state(eps, s).map(|r| r.ensembles.len())).collect::<Result<_>>()?;
            ok &= per_seed.iter().all(|&n| n == want);
            counts.push(json!({ "epsilon": eps, "expected": want, "found": per_seed }));
        }
        let summary: Vec<String> = counts
            .iter()
            .map(|c| format!("ε={}: {:?}", c["epsilon"], c["found"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect::<Vec<_>>()))
            .collect();
        Ok(Outcome {
            passed: ok,
            measured: json!({ "two_state_count_at_0.0624": below, "two_state_count_at_0.0626": above, "three_state": counts, "seeds": seeds }),
            detail: format!("2-state ensembles {below} at ε=0.0624, {above} at ε=0.0626; 3-state counts {}", summary.join(", ")),
        })
    }

    fn c4(&self) -> Result<Outcome> {
        let eps = [0.01, 0.005, 0.0025];
        let mut gaps = Vec::new();
        for &e in &eps {
            let (me, bloch) = self.model(e)?;
            let s = von_neumann_entropy(&steady_state(&me)?)?;
            let ens = two_state_qubit_ensembles(&bloch)?;
            let v_minus = ens
                .iter()
                .min_by(|a, b| a.eigenvalue.unwrap_or(0.0).total_cmp(&b.eigenvalue.unwrap_or(0.0)))
                .ok_or(Error::NoRealEigenvector)?;
            gaps.push(v_minus.entropy_bits - s);
        }
        let scaled: Vec<f64> = gaps.iter().zip(&eps).map(|(g, e)| g / e.powi(3)).collect();
        let ratios: Vec<f64> = gaps.windows(2).map(|w| w[0] / w[1]).collect();
        let factor = 2f64.powf(self.config.tolerance_scale);
        let ok = gaps.iter().all(|&g| g > 0.0 && g.is_finite()) && ratios.iter().all(|&r| r >= 8.0 / factor && r <= 8.0 * factor);
        Ok(Outcome {
            passed: ok,
            measured: json!({ "epsilon": eps, "gap_bits": gaps, "gap_over_eps3": scaled, "successive_ratios": ratios }),
            detail: format!("gap/ε³ = {:?}, successive ratios {:?} (want 8 within ×{factor:.2})", round4(&scaled), round4(&ratios)),
        })
    }

    fn c5(&self) -> Result<Outcome> {
        let tol = self.tol(0.02);
        let search = self.three_state(1e-4, self.config.seed)?;
        let h: Vec<f64> = search.ensembles.iter().map(|e| e.entropy_bits).collect();
        let near_high = h.iter().filter(|&&x| (x - 1.206).abs() < tol).count();
        let near_zero = h.iter().filter(|&&x| x.abs() < tol).count();
        Ok(Outcome {
            passed: near_high == 4 && near_zero == 4,
            measured: json!({ "epsilon": 1e-4, "entropies_bits": h, "within_tol_of_1.206": near_high, "within_tol_of_0": near_zero }),
            detail: format!("{} solutions, entropies {:?}; {near_high} within {tol} of 1.206, {near_zero} within {tol} of 0", h.len(), round4(&h)),
        })
    }

    fn c6(&self) -> Result<Outcome> {
        let tol = self.tol(1e-9);
        let mut worst = f64::INFINITY;
        let mut count = 0usize;
        let mut visit = |h: f64, s: f64| {
            worst = worst.min(h - s);
            count += 1;
        };
        for bloch in random_qubit_models(200, self.config.seed)? {
            let s = bloch_entropy(&bloch.steady_state()?);
            for e in two_state_qubit_ensembles(&bloch)? {
                visit(e.entropy_bits, s);
            }
        }
        let mut powers = default_epsilon_grid();
        powers.extend([0.0624, 0.0626, 0.01, 0.005, 0.0025]);
        for eps in powers {
            let (_, bloch) = self.model(eps)?;
            let s = bloch_entropy(&bloch.steady_state()?);
            for e in two_state_qubit_ensembles(&bloch)? {
                visit(e.entropy_bits, s);
            }
        }
        for eps in [0.09, 0.07, 0.05, 0.04, 0.02, 1e-4] {
            let (_, bloch) = self.model(eps)?;
            let s = bloch_entropy(&bloch.steady_state()?);
            for e in &self.three_state(eps, self.config.seed)?.ensembles {
                visit(e.entropy_bits, s);
            }
        }
        Ok(Outcome {
            passed: worst >= -tol,
            measured: json!({ "ensembles": count, "min_h_minus_s": worst }),
            detail: format!("{count} ensembles, min(h − S) = {worst:.3e} (tol −{tol:.0e})"),
        })
    }

    fn c7(&self) -> Result<Outcome> {
        let (res_tol, rate_tol) = (self.tol(1e-9), self.tol(1e-6));
        let mut worst_residual = 0.0f64;
        let mut worst_rate = 0.0f64;
        let mut schemes = 0usize;
        for eps in [0.04, 0.05] {
            let (me, bloch) = self.model(eps)?;
            let mut all = two_state_qubit_ensembles(&bloch)?;
            all.extend(self.three_state(eps, self.config.seed)?.ensembles.iter().cloned());
            for e in &all {
                let scheme = scheme_for_ensemble(&me, e)?;
                let fit = check_pr(&bloch, &e.states, crate::ensemble::default_pr_tolerance(&bloch))?;
                worst_residual = worst_residual.max(scheme.max_residual());
                for k in 0..e.k() {
                    let kappa = fit.rates[(k, (k + 1) % e.k())];
                    worst_rate = worst_rate.max((scheme.jump_rates[k] - kappa).abs() / kappa);
                }
                schemes += 1;
            }
        }
        Ok(Outcome {
            passed: worst_residual < res_tol && worst_rate < rate_tol,
            measured: json!({ "schemes": schemes, "max_cycle_residual": worst_residual, "max_rate_relative_error": worst_rate }),
            detail: format!("{schemes} schemes, cycle residual ≤ {worst_residual:.2e} (tol {res_tol:.0e}), rate error ≤ {worst_rate:.2e} (tol {rate_tol:.0e})"),
        })
    }

    fn v1_scheme(&self, eps: f64) -> Result<(MasterEquation, AdaptiveScheme)> {
        let (me, bloch) = self.model(eps)?;
        let scheme = scheme_for_ensemble(&me, &v1_ensemble(&bloch)?)?;
        Ok((me, scheme))
    }

    /// The 3-state solution whose slowest transition is fastest, so that a
    /// finite run completes as many memory cycles as possible.
    fn busiest_three_state(&self, eps: f64) -> Result<(MasterEquation, PREnsemble, AdaptiveScheme)> {
        let (me, _) = self.model(eps)?;
        let search = self.three_state(eps, self.config.seed)?;
        let slowest = |e: &PREnsemble| (0..e.k()).map(|j| e.rates[(j, (j + 1) % e.k())]).fold(f64::INFINITY, f64::min);
        let e = search
            .ensembles
            .iter()
            .max_by(|a, b| slowest(a).total_cmp(&slowest(b)))
            .ok_or_else(|| Error::Precondition(format!("no 3-state solution at ε = {eps}")))?
            .clone();
        let scheme = scheme_for_ensemble(&me, &e)?;
        Ok((me, e, scheme))
    }

    fn c8(&self) -> Result<Outcome> {
        let t_final = 1e3 / self.config.gamma;
        let dev_tol = self.tol(1e-6);
        let sigmas = 3.0 * self.config.tolerance_scale;

        let (me, scheme) = self.v1_scheme(0.04)?;
        let rec = simulate_adaptive(&me, &scheme, &SimulationOptions::new(t_final, default_dt(&scheme), self.config.seed))?;
        let stats2 = occupation_stats(&rec)?;
        let dev2 = rec.max_state_deviation.unwrap_or(f64::INFINITY);
        let ok2 = dev2 < dev_tol && (0..2).all(|k| (stats2.empirical_probs[k] - 0.5).abs() <= sigmas * stats2.stderr[k]);

        let (me3, e3, scheme3) = self.busiest_three_state(0.05)?;
        let rec3 = simulate_adaptive(&me3, &scheme3, &SimulationOptions::new(t_final, default_dt(&scheme3), self.config.seed))?;
        let stats3 = occupation_stats(&rec3)?;
        let expect3 = stationary_probs_from_rates(&e3.rates)?;
        let dev3 = rec3.max_state_deviation.unwrap_or(f64::INFINITY);
        let ok3 = dev3 < dev_tol && (0..3).all(|k| (stats3.empirical_probs[k] - expect3[k]).abs() <= sigmas * stats3.stderr[k]);

        Ok(Outcome {
            passed: ok2 && ok3,
            measured: json!({
                "two_state": { "max_state_deviation": dev2, "probs": stats2.empirical_probs, "stderr": stats2.stderr, "expected": [0.5, 0.5], "jumps": rec.jump_count },
                "three_state": { "max_state_deviation": dev3, "probs": stats3.empirical_probs, "stderr": stats3.stderr, "expected": expect3, "jumps": rec3.jump_count },
            }),
            detail: format!(
                "v1: deviation {dev2:.1e}, probs {:?} ± {:?}; 3-state: deviation {dev3:.1e}, probs {:?} ± {:?} vs {:?}",
                round4(&stats2.empirical_probs),
                round4(&stats2.stderr),
                round4(&stats3.empirical_probs),
                round4(&stats3.stderr),
                round4(&expect3)
            ),
        })
    }

    fn c9(&self) -> Result<Outcome> {
        let tol = self.tol(0.05);
        let n_traj = 5000;
        let gamma = self.config.gamma;
        let (me, scheme) = self.v1_scheme(0.04)?;
        let grid: Vec<f64> = (0..=40).map(|i| 0.5 * i as f64 / gamma).collect();
        let rho0 = DensityMatrix::pure(&scheme.cycle[0]);
        let exact = integrate_me_on_grid(&me, &rho0, &grid, me.default_dt())?;
        let adaptive = ensemble_average(&me, &scheme, n_traj, &grid, self.config.seed)?;
        let plain = ensemble_average_plain(&me, &scheme.cycle[0], n_traj, &grid, 1e-3 / gamma, self.config.seed)?;
        let worst = |avg: &[CMatrix]| avg.iter().zip(&exact).map(|(a, b)| linalg::trace_distance(a, b)).fold(0.0, f64::max);
        let (da, dp) = (worst(&adaptive), worst(&plain));
        Ok(Outcome {
            passed: da < tol && dp < tol,
            measured: json!({ "trajectories": n_traj, "t_max": grid[grid.len() - 1], "adaptive_max_trace_distance": da, "plain_max_trace_distance": dp }),
            detail: format!("{n_traj} trajectories on [0, 20/γ]: adaptive {da:.4}, plain {dp:.4} (tol {tol})"),
        })
    }

    fn c10(&self) -> Result<Outcome> {
        let t_final = 1e3 / self.config.gamma;
        let (me, scheme) = self.v1_scheme(0.04)?;
        let adaptive = simulate_adaptive(&me, &scheme, &SimulationOptions::new(t_final, default_dt(&scheme), self.config.seed).counting(0.01))?;
        let ground = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let plain = simulate_plain(&me, &ground, &SimulationOptions::new(t_final, 1e-3 / self.config.gamma, self.config.seed).counting(0.01))?;
        let (na, np) = (adaptive.distinct_states.unwrap_or(0), plain.distinct_states.unwrap_or(0));
        Ok(Outcome {
            passed: np > 100 && na == scheme.k(),
            measured: json!({ "resolution": 0.01, "plain_distinct_states": np, "plain_jumps": plain.jump_count, "adaptive_distinct_states": na, "K": scheme.k() }),
            detail: format!("plain visits {np} distinct states (want > 100), adaptive visits {na} (want {})", scheme.k()),
        })
    }

    fn c11(&self) -> Result<Outcome> {
        let mut mismatches = Vec::new();
        for d in 2..=6usize {
            let boundary = (d - 1).pow(2) + 1;
            for k in 1..=boundary + 2 {
                let dof = dof_count(d, k)?;
                let expect = k > boundary;
                if dof.underdetermined != expect || dof.underdetermined != (dof.unknowns > dof.constraints) {
                    mismatches.push(json!({ "D": d, "K": k }));
                }
            }
        }
        Ok(Outcome {
            passed: mismatches.is_empty(),
            measured: json!({ "mismatches": mismatches }),
            detail: format!("{} mismatches for D = 2..6", mismatches.len()),
        })
    }
}

fn round4(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}

fn bloch_entropy(r: &Vector3<f64>) -> f64 {
    let p = (1.0 + r.norm().min(1.0)) / 2.0;
    let q = 1.0 - p;
    [p, q].iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

fn v1_ensemble(bloch: &BlochModel) -> Result<PREnsemble> {
    two_state_qubit_ensembles(bloch)?
        .into_iter()
        .find(|e| {
            let axis = (e.states[1] - e.states[0]).normalize();
            axis.x.abs() > 0.5
        })
        .ok_or_else(|| Error::Precondition("no ensemble along the x axis".into()))
}

/// `n` random qubit master equations (one or two jump operators) that are
/// ergodic and have a mixed steady state; model `i` is drawn from stream `i`
/// until it qualifies.
pub fn random_qubit_models(n: usize, seed: u64) -> Result<Vec<BlochModel>> {
    let mut out = Vec::with_capacity(n);
    let mut index = 0u64;
    while out.len() < n {
        let mut rng = rng::stream(seed ^ 0x5175_6269_7473, index);
        index += 1;
        let mut entry = || c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let h = linalg::hermitize(&CMatrix::from_fn(2, 2, |_, _| entry()));
        let n_ops = if index.is_multiple_of(2) { 1 } else { 2 };
        let ops: Vec<CMatrix> = (0..n_ops).map(|_| CMatrix::from_fn(2, 2, |_, _| entry())).collect();
        let me = MasterEquation::new(h, ops)?;
        let Ok(rho) = steady_state(&me) else { continue };
        let bloch = to_bloch(&me)?;
        let r = density_to_bloch(&rho)?;
        if bloch.is_ergodic() && r.norm() < 1.0 - 1e-6 {
            out.push(bloch);
        }
        if index > 100 * n as u64 {
            return Err(Error::Numerical("could not draw enough ergodic models".into()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_models_are_reproducible_and_mixed() {
        let a = random_qubit_models(5, 3).unwrap();
        assert_eq!(a, random_qubit_models(5, 3).unwrap());
        for m in &a {
            assert!(m.steady_state().unwrap().norm() < 1.0);
        }
    }

    #[test]
    fn binary_entropy_of_bloch_vectors() {
        assert!((bloch_entropy(&Vector3::zeros()) - 1.0).abs() < 1e-15);
        assert_eq!(bloch_entropy(&Vector3::new(0.0, 0.0, 1.0)), 0.0);
    }

    #[test]
    fn counting_criterion_passes_and_tightening_is_harmless() {
        let suite = Suite::new(VerifyConfig { tolerance_scale: 1e-3, ..VerifyConfig::default() });
        let r = suite.run(11);
        assert!(r.passed, "{r}");
        assert!(r.to_string().starts_with("criterion 11 [PASS]"));
    }

    #[test]
    fn tight_tolerances_fail_with_measurements() {
        let suite = Suite::new(VerifyConfig { tolerance_scale: 1e-12, ..VerifyConfig::default() });
        let r = suite.run(1);
        assert!(!r.passed);
        assert!(r.measured["max_residual"].is_number());
    }

    #[test]
    fn unknown_criterion_fails() {
        assert!(!Suite::new(VerifyConfig::default()).run(42).passed);
    }
}
