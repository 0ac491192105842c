//! Lists the three-state cyclic ensembles of resonance fluorescence.
//!
//!     cargo run --release --example three_state -- 0.05 [n_starts]

use qtrack::bloch::to_bloch;
use qtrack::fluorescence::fluorescence_at;
use qtrack::search::{cyclic_k_state_search, SearchOptions};

fn main() -> qtrack::Result<()> {
    let mut args = std::env::args().skip(1);
    let eps: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let n_starts = args.next().and_then(|s| s.parse().ok()).unwrap_or(2000);

    let model = to_bloch(&fluorescence_at(1.0, eps)?)?;
    let found = cyclic_k_state_search(&model, 3, SearchOptions { n_starts, seed: 1 })?;
    println!("ε = {eps}: {} ensembles ({:?})", found.ensembles.len(), found.diagnostics);
    for e in &found.ensembles {
        let rates: Vec<f64> = (0..3).map(|j| e.rates[(j, (j + 1) % 3)]).collect();
        println!("h = {:.6} bits  p = {:.4?}  κ = {:.4?}", e.entropy_bits, e.probs, rates);
        for r in &e.states {
            println!("    ({:+.6}, {:+.6}, {:+.6})", r.x, r.y, r.z);
        }
    }
    Ok(())
}
