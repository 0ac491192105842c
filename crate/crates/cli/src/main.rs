mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use qtrack::bloch::{density_to_bloch, to_bloch};
use qtrack::ensemble::{two_state_qubit_ensembles, PREnsemble};
use qtrack::fluorescence::{build_fluorescence_me, emit_bloch_geometry, omega_from_epsilon, sweep_entropy, SweepConfig};
use qtrack::lindblad::{steady_state, von_neumann_entropy, MasterEquation};
use qtrack::search::{cyclic_k_state_search, SearchOptions};
use qtrack::simulate::{
    default_dt, occupation_stats, simulate_adaptive, simulate_adaptive_exact, simulate_plain, SimulationOptions,
};
use qtrack::unravel::scheme_for_ensemble;
use qtrack::verify::{Suite, VerifyConfig, VerifyReport, CRITERIA};

#[derive(Parser)]
#[command(name = "qtrack", version, about = "Finite-memory ensembles and adaptive unravellings of qubit master equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the master equation as JSON.
    Model(ModelArgs),
    /// Find physically realizable ensembles and check them.
    Ensembles(EnsembleArgs),
    /// Back out the adaptive local-oscillator settings for one ensemble.
    Scheme(EnsembleArgs),
    /// Simulate a jump trajectory and report memory occupations.
    Simulate(SimulateArgs),
    /// Sweep the driving power and tabulate ensemble entropies.
    Sweep(SweepArgs),
    /// Export Bloch vectors of every ensemble at one driving power.
    Geometry(GeometryArgs),
    /// Run the acceptance checks; exits non-zero if any fails.
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Decay rate γ.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Rabi frequency Ω.
    #[arg(long, conflicts_with = "epsilon")]
    omega: Option<f64>,
    /// Driving power ε = Ω²/γ².
    #[arg(long)]
    epsilon: Option<f64>,
    /// Master equation JSON file; overrides the resonance-fluorescence flags.
    #[arg(long, conflicts_with_all = ["omega", "epsilon"])]
    model: Option<PathBuf>,
    /// Output path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ModelArgs {
    fn build(&self) -> Result<MasterEquation> {
        if let Some(path) = &self.model {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            return Ok(MasterEquation::from_json(&text)?);
        }
        let omega = match (self.omega, self.epsilon) {
            (Some(o), _) => o,
            (None, Some(e)) if e >= 0.0 => omega_from_epsilon(self.gamma, e),
            (None, Some(e)) => bail!("driving power must be non-negative, got {e}"),
            (None, None) => omega_from_epsilon(self.gamma, 0.04),
        };
        Ok(build_fluorescence_me(self.gamma, omega)?)
    }
}

#[derive(Args, Clone)]
struct EnsembleArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Ensemble size: 2 for the analytic construction, ≥ 3 for the cyclic search.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Which ensemble to use when several exist (scheme and simulate).
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    n_starts: usize,
}

impl EnsembleArgs {
    fn ensembles(&self, me: &MasterEquation) -> Result<Vec<PREnsemble>> {
        let bloch = to_bloch(me)?;
        Ok(match self.k {
            0 | 1 => bail!("ensemble size must be at least 2"),
            2 => two_state_qubit_ensembles(&bloch)?,
            k => cyclic_k_state_search(&bloch, k, SearchOptions { n_starts: self.n_starts, seed: self.seed })?.ensembles,
        })
    }

    fn chosen(&self, me: &MasterEquation) -> Result<PREnsemble> {
        let all = self.ensembles(me)?;
        let n = all.len();
        all.into_iter().nth(self.index).with_context(|| format!("ensemble index {} out of range ({n} found)", self.index))
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    ensemble: EnsembleArgs,
    #[arg(long, default_value_t = 1000.0)]
    t_final: f64,
    /// Time step of the stepped integrator (default: rate × dt = 1e-3).
    #[arg(long)]
    dt: Option<f64>,
    /// Sample the memory chain exactly instead of stepping the state.
    #[arg(long, conflicts_with = "plain")]
    exact: bool,
    /// Simulate the unmodified unravelling from the ground state instead.
    #[arg(long)]
    plain: bool,
    /// Bloch resolution for counting distinct visited states.
    #[arg(long)]
    resolution: Option<f64>,
    /// Occupation statistics JSON (default: next to --out as stats.json).
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Comma-separated ε values (default: log grid plus threshold neighbourhoods).
    #[arg(long, value_delimiter = ',')]
    epsilon_grid: Option<Vec<f64>>,
    /// Comma-separated ensemble sizes.
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    k: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    n_starts: usize,
    #[arg(long, default_value = "entropy_sweep.csv")]
    out: PathBuf,
}

impl SweepArgs {
    fn config(&self) -> SweepConfig {
        let mut config = SweepConfig { gamma: self.gamma, k_list: self.k.clone(), seed: self.seed, n_starts: self.n_starts, ..SweepConfig::default() };
        if let Some(grid) = &self.epsilon_grid {
            config.epsilon_grid = grid.clone();
        }
        config
    }
}

#[derive(Args)]
struct GeometryArgs {
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.04)]
    epsilon: f64,
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    k: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    n_starts: usize,
    #[arg(long, default_value = "geometry.json")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    n_starts: usize,
    /// Multiplies every numerical tolerance (below 1 tightens).
    #[arg(long, default_value_t = 1.0)]
    tolerance_scale: f64,
    /// Comma-separated subset of criteria (default: all).
    #[arg(long, value_delimiter = ',')]
    criteria: Option<Vec<u8>>,
    #[arg(long, default_value = "verify_report.json")]
    out: PathBuf,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Model(args) => {
            let me = args.build()?;
            let doc: serde_json::Value = serde_json::from_str(&me.to_json()?)?;
            output::emit(args.out.as_deref(), &output::to_json(&doc)?)?;
        }
        Command::Ensembles(args) => {
            let me = args.model.build()?;
            let rho = steady_state(&me)?;
            let ensembles = args.ensembles(&me)?;
            let r_ss = density_to_bloch(&rho)?;
            let doc = json!({
                "r_ss": [r_ss.x, r_ss.y, r_ss.z],
                "S_vn_bits": von_neumann_entropy(&rho)?,
                "ensembles": ensembles.iter().map(PREnsemble::to_file).collect::<Vec<_>>(),
            });
            output::emit(args.model.out.as_deref(), &output::to_json(&doc)?)?;
            eprintln!("{} ensemble(s) with K = {}", ensembles.len(), args.k);
        }
        Command::Scheme(args) => {
            let me = args.model.build()?;
            let scheme = scheme_for_ensemble(&me, &args.chosen(&me)?)?;
            output::emit(args.model.out.as_deref(), &output::to_json(&scheme.to_file())?)?;
        }
        Command::Simulate(args) => simulate(args)?,
        Command::Sweep(args) => {
            let sweep = sweep_entropy(&args.config())?;
            for p in sweep.points.iter().filter(|p| p.note.is_some()) {
                eprintln!("ε = {}: {}", p.epsilon, p.note.as_deref().unwrap_or_default());
            }
            let mut buf = Vec::new();
            sweep.write_csv(&mut buf)?;
            output::write_file(&args.out, &buf)?;
            eprintln!("{} grid points, {} families → {}", sweep.points.len(), sweep.families.len(), args.out.display());
        }
        Command::Geometry(args) => {
            let config = SweepConfig { gamma: args.gamma, epsilon_grid: vec![args.epsilon], k_list: args.k.clone(), seed: args.seed, n_starts: args.n_starts };
            let geometry = emit_bloch_geometry(&config, args.epsilon)?;
            output::write_file(&args.out, output::to_json(&geometry)?.as_bytes())?;
            eprintln!("{} ensemble(s) → {}", geometry.ensembles.len(), args.out.display());
        }
        Command::Verify(args) => return verify(args),
    }
    Ok(ExitCode::SUCCESS)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let me = args.ensemble.model.build()?;
    let seed = args.ensemble.seed;
    let record = if args.plain {
        let ground = qtrack::linalg::CVector::from_vec(vec![qtrack::linalg::re(1.0), qtrack::linalg::re(0.0)]);
        let dt = args.dt.unwrap_or_else(|| me.default_dt());
        let mut opts = SimulationOptions::new(args.t_final, dt, seed);
        opts.resolution = args.resolution;
        simulate_plain(&me, &ground, &opts)?
    } else {
        let scheme = scheme_for_ensemble(&me, &args.ensemble.chosen(&me)?)?;
        if args.exact {
            simulate_adaptive_exact(&scheme, args.t_final, seed)?
        } else {
            let mut opts = SimulationOptions::new(args.t_final, args.dt.unwrap_or_else(|| default_dt(&scheme)), seed);
            opts.resolution = args.resolution;
            simulate_adaptive(&me, &scheme, &opts)?
        }
    };
    let stats = occupation_stats(&record)?;
    let trajectory = args.ensemble.model.out.clone().unwrap_or_else(|| PathBuf::from("trajectory.csv"));
    let mut csv = Vec::new();
    record.write_csv(&mut csv)?;
    output::write_file(&trajectory, &csv)?;
    let stats_path = args.stats.clone().unwrap_or_else(|| sibling(&trajectory, "stats.json"));
    let doc = json!({
        "empirical_probs": stats.empirical_probs,
        "stderr": stats.stderr,
        "n_jumps": stats.n_jumps,
        "total_time": stats.total_time,
        "max_state_deviation": record.max_state_deviation,
        "distinct_states": record.distinct_states,
    });
    output::write_file(&stats_path, output::to_json(&doc)?.as_bytes())?;
    eprintln!("{} jumps; trajectory → {}, stats → {}", record.jump_count, trajectory.display(), stats_path.display());
    Ok(())
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().map(|p| p.join(name)).unwrap_or_else(|| PathBuf::from(name))
}

fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let suite = Suite::new(VerifyConfig { gamma: args.gamma, seed: args.seed, n_starts: args.n_starts, tolerance_scale: args.tolerance_scale });
    let ids = args.criteria.clone().unwrap_or_else(|| CRITERIA.to_vec());
    let mut reports = Vec::with_capacity(ids.len());
    for id in ids {
        let r = suite.run(id);
        println!("{r}");
        reports.push(r);
    }
    let report = VerifyReport {
        all_passed: reports.iter().all(|r| r.passed),
        gamma: args.gamma,
        seed: args.seed,
        n_starts: args.n_starts,
        tolerance_scale: args.tolerance_scale,
        criteria: reports,
    };
    output::write_file(&args.out, output::to_json(&report)?.as_bytes())?;
    let failed: Vec<u8> = report.criteria.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    if failed.is_empty() {
        println!("all {} criteria passed", report.criteria.len());
        Ok(ExitCode::SUCCESS)
    } else {
        println!("failed: {failed:?}");
        Ok(ExitCode::from(1))
    }
}
