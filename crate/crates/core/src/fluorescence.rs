//! Resonance fluorescence: a two-level atom driven at Rabi frequency `Ω` and
//! decaying to its ground state `|0⟩` at rate `γ`.
//!
//! Besides the model itself this module sweeps the driving power
//! `ε = Ω²/γ²`, labels the ensembles it finds by family, and exports the
//! Bloch-sphere geometry at a single power.

use std::io::Write;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::Serialize;

use crate::bloch::{density_to_bloch, to_bloch, BlochModel};
use crate::ensemble::{check_pr, default_pr_tolerance, two_state_qubit_ensembles, PREnsemble};
use crate::error::{Error, Result};
use crate::lindblad::{steady_state, von_neumann_entropy, MasterEquation};
use crate::linalg::{re, CMatrix};
use crate::search::{cyclic_distance, cyclic_k_state_search, SearchOptions, DEFAULT_STARTS};

/// Powers where the set of ensembles changes: 3-state counts drop at 0.0335,
/// 0.0610 and 0.0795, and the `v±` eigenvectors turn complex at 0.0625.
pub const THRESHOLDS: [f64; 4] = [0.0335, 0.0610, 0.0625, 0.0795];
/// Tolerance for the `x → −x` mirror comparisons.
pub const MIRROR_TOLERANCE: f64 = 1e-7;
/// Largest state-set distance accepted when continuing a family to the next grid point.
pub const FAMILY_MATCH_LIMIT: f64 = 0.5;

/// `H = Ω(|0⟩⟨1| + |1⟩⟨0|)/2`, `c = √γ |0⟩⟨1|`.
pub fn build_fluorescence_me(gamma: f64, omega: f64) -> Result<MasterEquation> {
    if !(gamma > 0.0) || !omega.is_finite() {
        return Err(Error::InvalidModel(format!("need γ > 0 and finite Ω, got γ = {gamma}, Ω = {omega}")));
    }
    let h = CMatrix::from_row_slice(2, 2, &[re(0.0), re(omega / 2.0), re(omega / 2.0), re(0.0)]);
    let mut c = CMatrix::zeros(2, 2);
    c[(0, 1)] = re(gamma.sqrt());
    MasterEquation::new(h, vec![c])
}

/// `Ω = γ √ε` for dimensionless driving power `ε = Ω²/γ²`.
pub fn omega_from_epsilon(gamma: f64, epsilon: f64) -> f64 {
    gamma * epsilon.sqrt()
}

pub fn fluorescence_at(gamma: f64, epsilon: f64) -> Result<MasterEquation> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidModel(format!("driving power must be ≥ 0, got {epsilon}")));
    }
    build_fluorescence_me(gamma, omega_from_epsilon(gamma, epsilon))
}

/// 60 log-spaced powers in `[1e-4, 0.12]` plus each threshold and its ±0.002 neighbours.
pub fn default_epsilon_grid() -> Vec<f64> {
    let (lo, hi) = (1e-4f64.ln(), 0.12f64.ln());
    let mut grid: Vec<f64> = (0..60).map(|i| (lo + (hi - lo) * i as f64 / 59.0).exp()).collect();
    for t in THRESHOLDS {
        grid.extend([t - 0.002, t, t + 0.002]);
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    grid
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub gamma: f64,
    pub epsilon_grid: Vec<f64>,
    /// Ensemble sizes to compute: 2 uses the analytic construction, ≥ 3 the cyclic search.
    pub k_list: Vec<usize>,
    pub seed: u64,
    pub n_starts: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { gamma: 1.0, epsilon_grid: default_epsilon_grid(), k_list: vec![2, 3], seed: 0, n_starts: DEFAULT_STARTS }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidModel(format!("γ must be positive, got {}", self.gamma)));
        }
        if self.epsilon_grid.iter().any(|e| !(*e >= 0.0)) || self.epsilon_grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Precondition("ε grid must be non-negative and sorted ascending".into()));
        }
        if self.k_list.iter().any(|&k| k < 2) {
            return Err(Error::Precondition("ensemble sizes must be at least 2".into()));
        }
        Ok(())
    }
}

/// Name of the eigenvector a two-state ensemble was built from: `v1` for the
/// `x` axis, otherwise `v+` / `v-` for the slower / faster `y`–`z` mode.
fn two_state_family(ens: &PREnsemble, all: &[PREnsemble]) -> String {
    let axis = (ens.states[1] - ens.states[0]).normalize();
    if axis.x.abs() > 0.5 {
        return "v1".into();
    }
    let lambda = ens.eigenvalue.unwrap_or(f64::NAN);
    let other = all
        .iter()
        .filter(|e| !std::ptr::eq(*e, ens))
        .filter(|e| (e.states[1] - e.states[0]).normalize().x.abs() <= 0.5)
        .filter_map(|e| e.eigenvalue)
        .next();
    match other {
        Some(mu) if mu > lambda => "v-".into(),
        _ => "v+".into(),
    }
}

/// Ensembles of one size at one power.
fn ensembles_at(bloch: &BlochModel, k: usize, options: SearchOptions) -> Result<Vec<PREnsemble>> {
    if k == 2 {
        two_state_qubit_ensembles(bloch)
    } else {
        Ok(cyclic_k_state_search(bloch, k, options)?.ensembles)
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub s_vn_bits: f64,
    /// `(family id, ensemble)` pairs.
    pub ensembles: Vec<(String, PREnsemble)>,
    /// Why ensembles were not constructed, if they were not.
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub gamma: f64,
    pub points: Vec<SweepPoint>,
    /// Family ids in order of first appearance, with their ensemble size.
    pub families: Vec<(String, usize)>,
    /// Largest state-set distance between matched neighbours, per family.
    pub max_step: Vec<f64>,
}

type StateSet = Vec<Vector3<f64>>;

fn family_index(families: &mut Vec<(String, usize)>, max_step: &mut Vec<f64>, last: &mut Vec<Option<StateSet>>, id: &str, k: usize) -> usize {
    match families.iter().position(|(f, _)| f == id) {
        Some(i) => i,
        None => {
            families.push((id.to_string(), k));
            max_step.push(0.0);
            last.push(None);
            families.len() - 1
        }
    }
}

struct RawPoint {
    epsilon: f64,
    s_vn_bits: f64,
    by_k: Vec<(usize, Vec<PREnsemble>)>,
    note: Option<String>,
}

fn raw_point(config: &SweepConfig, epsilon: f64) -> Result<RawPoint> {
    let me = fluorescence_at(config.gamma, epsilon)?;
    let rho = steady_state(&me)?;
    let s_vn_bits = von_neumann_entropy(&rho)?;
    let rss = density_to_bloch(&rho)?;
    if rss.norm() >= 1.0 - 1e-9 {
        return Ok(RawPoint {
            epsilon,
            s_vn_bits: 0.0,
            by_k: Vec::new(),
            note: Some("steady state is pure; no ensemble needed".into()),
        });
    }
    let bloch = to_bloch(&me)?;
    let tol = default_pr_tolerance(&bloch);
    let options = SearchOptions { n_starts: config.n_starts, seed: config.seed };
    let mut by_k = Vec::new();
    for &k in &config.k_list {
        let found = ensembles_at(&bloch, k, options)?;
        for e in &found {
            let check = check_pr(&bloch, &e.states, tol)?;
            if !check.feasible {
                return Err(Error::InconsistentEnsemble { index: 0, residual: check.residual });
            }
        }
        by_k.push((k, found));
    }
    Ok(RawPoint { epsilon, s_vn_bits, by_k, note: None })
}

/// Entropies of every ensemble family across the ε grid. Grid points are
/// evaluated in parallel; families of size ≥ 3 are then followed from
/// point to point by nearest-neighbour matching of their state sets.
pub fn sweep_entropy(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let raw: Vec<RawPoint> =
        config.epsilon_grid.par_iter().map(|&eps| raw_point(config, eps)).collect::<Result<Vec<_>>>()?;

    let mut families: Vec<(String, usize)> = Vec::new();
    let mut max_step: Vec<f64> = Vec::new();
    // Last known state set of each tracked family (cyclic families only).
    let mut last: Vec<Option<StateSet>> = Vec::new();
    let mut counters: Vec<(usize, usize)> = Vec::new();
    let mut points = Vec::with_capacity(raw.len());

    for point in raw {
        let mut labelled = Vec::new();
        for (k, found) in point.by_k {
            if k == 2 {
                for e in &found {
                    let id = two_state_family(e, &found);
                    family_index(&mut families, &mut max_step, &mut last, &id, 2);
                    labelled.push((id, e.clone()));
                }
                continue;
            }
            // Greedy assignment in order of increasing distance to the families
            // alive at the previous point.
            let alive: Vec<usize> =
                (0..families.len()).filter(|&i| families[i].1 == k && last[i].is_some()).collect();
            let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
            for (s, e) in found.iter().enumerate() {
                for &f in &alive {
                    let d = cyclic_distance(last[f].as_ref().unwrap(), &e.states);
                    if d < FAMILY_MATCH_LIMIT {
                        pairs.push((d, s, f));
                    }
                }
            }
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut solution_family = vec![None; found.len()];
            let mut taken = vec![false; families.len()];
            for (d, s, f) in pairs {
                if solution_family[s].is_none() && !taken[f] {
                    solution_family[s] = Some(f);
                    taken[f] = true;
                    max_step[f] = max_step[f].max(d);
                }
            }
            for f in alive {
                if !taken[f] {
                    last[f] = None;
                }
            }
            for (s, e) in found.into_iter().enumerate() {
                let f = match solution_family[s] {
                    Some(f) => f,
                    None => {
                        let n = match counters.iter_mut().find(|(kk, _)| *kk == k) {
                            Some((_, n)) => {
                                *n += 1;
                                *n
                            }
                            None => {
                                counters.push((k, 1));
                                1
                            }
                        };
                        family_index(&mut families, &mut max_step, &mut last, &format!("c{k}-{n}"), k)
                    }
                };
                last[f] = Some(e.states.clone());
                labelled.push((families[f].0.clone(), e));
            }
        }
        points.push(SweepPoint { epsilon: point.epsilon, s_vn_bits: point.s_vn_bits, ensembles: labelled, note: point.note });
    }
    Ok(SweepResult { gamma: config.gamma, points, families, max_step })
}

impl SweepResult {
    /// `epsilon,family_id,K,h_bits,S_vn_bits,exists`: one row per grid point
    /// and family; `h_bits` is empty where the family does not exist.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "epsilon,family_id,K,h_bits,S_vn_bits,exists")?;
        for p in &self.points {
            for (id, k) in &self.families {
                match p.ensembles.iter().find(|(f, _)| f == id) {
                    Some((_, e)) => writeln!(w, "{:.16e},{},{},{:.16e},{:.16e},true", p.epsilon, id, k, e.entropy_bits, p.s_vn_bits)?,
                    None => writeln!(w, "{:.16e},{},{},,{:.16e},false", p.epsilon, id, k, p.s_vn_bits)?,
                }
            }
        }
        Ok(())
    }

    /// Ensembles found at the grid point closest to `epsilon`.
    pub fn at(&self, epsilon: f64) -> Option<&SweepPoint> {
        self.points.iter().min_by(|a, b| (a.epsilon - epsilon).abs().total_cmp(&(b.epsilon - epsilon).abs()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometryEnsemble {
    pub family: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub states_bloch: Vec<[f64; 3]>,
    pub probs: Vec<f64>,
    pub entropy_bits: f64,
    /// Reflection `x → −x` maps the ensemble onto itself.
    pub mirror_symmetric: bool,
    /// Index of the ensemble that is this one's mirror image, if another one is.
    pub mirror_partner: Option<usize>,
    /// Probability-weighted mean distance of the states from `r_ss`.
    pub mean_distance_from_steady_state: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Geometry {
    pub gamma: f64,
    pub epsilon: f64,
    pub r_ss: [f64; 3],
    pub s_vn_bits: f64,
    pub ensembles: Vec<GeometryEnsemble>,
}

/// Bloch vectors, weights and mirror relations of every ensemble at one power.
pub fn emit_bloch_geometry(config: &SweepConfig, epsilon: f64) -> Result<Geometry> {
    config.validate()?;
    let point = raw_point(config, epsilon)?;
    if let Some(note) = point.note {
        return Err(Error::Precondition(format!("ε = {epsilon}: {note}")));
    }
    let me = fluorescence_at(config.gamma, epsilon)?;
    let rss = density_to_bloch(&steady_state(&me)?)?;
    let mut all: Vec<(String, PREnsemble)> = Vec::new();
    for (k, found) in point.by_k {
        for (i, e) in found.iter().enumerate() {
            let id = if k == 2 { two_state_family(e, &found) } else { format!("c{k}-{}", i + 1) };
            all.push((id, e.clone()));
        }
    }
    let ensembles = all
        .iter()
        .enumerate()
        .map(|(i, (family, e))| {
            let mirror = e.mirrored();
            let mirror_partner = all
                .iter()
                .enumerate()
                .position(|(j, (_, other))| j != i && other.k() == e.k() && cyclic_distance(&mirror.states, &other.states) < MIRROR_TOLERANCE);
            GeometryEnsemble {
                family: family.clone(),
                k: e.k(),
                states_bloch: e.states.iter().map(|r| [r.x, r.y, r.z]).collect(),
                probs: e.probs.clone(),
                entropy_bits: e.entropy_bits,
                mirror_symmetric: e.is_mirror_symmetric(MIRROR_TOLERANCE),
                mirror_partner,
                mean_distance_from_steady_state: e.states.iter().zip(&e.probs).map(|(r, p)| p * (r - rss).norm()).sum(),
            }
        })
        .collect();
    Ok(Geometry { gamma: config.gamma, epsilon, r_ss: [rss.x, rss.y, rss.z], s_vn_bits: point.s_vn_bits, ensembles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::to_bloch;
    use nalgebra::Matrix3;

    #[test]
    fn bloch_form_matches_closed_form() {
        let (gamma, omega) = (1.0, 0.2);
        let bloch = to_bloch(&build_fluorescence_me(gamma, omega).unwrap()).unwrap();
        let a = Matrix3::new(-0.5, 0.0, 0.0, 0.0, -0.5, -0.2, 0.0, 0.2, -1.0);
        assert!((bloch.a - a).amax() < 1e-15);
        assert!((bloch.b - Vector3::new(0.0, 0.0, 1.0)).amax() < 1e-15);
    }

    #[test]
    fn undriven_atom_relaxes_to_ground() {
        let me = build_fluorescence_me(1.0, 0.0).unwrap();
        let bloch = to_bloch(&me).unwrap();
        assert!((bloch.a - Matrix3::from_diagonal(&bloch.a.diagonal())).amax() == 0.0);
        let r = density_to_bloch(&steady_state(&me).unwrap()).unwrap();
        assert!((r - Vector3::new(0.0, 0.0, 1.0)).amax() < 1e-12);
    }

    #[test]
    fn eigenvectors_below_quarter_drive() {
        let (gamma, omega): (f64, f64) = (1.0, 0.2);
        let bloch = to_bloch(&build_fluorescence_me(gamma, omega).unwrap()).unwrap();
        let s = (gamma * gamma - 16.0 * omega * omega).sqrt();
        for v in [Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, gamma + s, 4.0 * omega), Vector3::new(0.0, gamma - s, 4.0 * omega)] {
            let av = bloch.a * v;
            let lambda = av.dot(&v) / v.norm_squared();
            assert!((av - v * lambda).amax() < 1e-14);
        }
    }

    #[test]
    fn default_grid_covers_thresholds() {
        let g = default_epsilon_grid();
        assert_eq!(g.len(), 72);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!((g[0] - 1e-4).abs() < 1e-15 && (g[g.len() - 1] - 0.12).abs() < 1e-12);
        for t in THRESHOLDS {
            for x in [t - 0.002, t, t + 0.002] {
                assert!(g.iter().any(|e| (e - x).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = SweepConfig { epsilon_grid: vec![0.02, 0.01], ..SweepConfig::default() };
        assert!(c.validate().is_err());
        c.epsilon_grid = vec![0.01];
        c.k_list = vec![1];
        assert!(c.validate().is_err());
    }

    #[test]
    fn two_state_sweep_labels_families() {
        let config = SweepConfig { epsilon_grid: vec![0.0, 0.01, 0.04, 0.07], k_list: vec![2], ..SweepConfig::default() };
        let sweep = sweep_entropy(&config).unwrap();
        assert!(sweep.points[0].note.is_some());
        assert!(sweep.points[0].ensembles.is_empty());
        assert_eq!(sweep.points[0].s_vn_bits, 0.0);
        let ids = |i: usize| sweep.points[i].ensembles.iter().map(|(f, _)| f.as_str()).collect::<Vec<_>>();
        assert_eq!(ids(1), vec!["v1", "v+", "v-"]);
        assert_eq!(ids(3), vec!["v1"]);
        for p in &sweep.points[1..] {
            let (_, v1) = p.ensembles.iter().find(|(f, _)| f == "v1").unwrap();
            assert!((v1.entropy_bits - 1.0).abs() < 1e-10);
        }
        let mut csv = Vec::new();
        sweep.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 1 + 4 * 3);
        assert!(text.lines().any(|l| l.contains(",v-,2,,") && l.ends_with("false")));
    }
}
