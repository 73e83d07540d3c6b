//! Reconstruct a random cluster circuit from sampled fragment tomography with
//! each fitter.

use tomocut::circuit::gen_cluster_unitary;
use tomocut::cut::CutSpec;
use tomocut::harness::{fit_all, CutCircuit};
use tomocut::knit::{full_distribution, trace_distance};
use tomocut::noise::NoiseSpec;
use tomocut::sim::ideal_distribution;
use tomocut::tomo::{collect_fragment_data, Fitter, Shots};

fn main() -> tomocut::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let cut = CutCircuit::new(gen_cluster_unitary(n, 3, 1)?, CutSpec::middle_layer(n, 3)?, 12)?;
    let ideal = ideal_distribution(&cut.circuit)?;
    let noise = NoiseSpec::ideal();
    for shots in [Shots::Finite(1000), Shots::Finite(10000), Shots::Exact] {
        let data = cut
            .fragments
            .iter()
            .map(|f| collect_fragment_data(f, &noise, shots, 7))
            .collect::<tomocut::Result<Vec<_>>>()?;
        for fitter in [Fitter::Lin, Fitter::Cls, Fitter::Memcls] {
            let tensors = fit_all(fitter, &data, &noise, false)?;
            let dist = full_distribution(&tensors, &cut.graph)?;
            println!(
                "n={n} shots={shots:>5} {fitter:<6} trace distance {:.3e} (raw mass {:.4})",
                trace_distance(&dist.probabilities, &ideal)?,
                dist.pre_norm_mass
            );
        }
    }
    Ok(())
}
