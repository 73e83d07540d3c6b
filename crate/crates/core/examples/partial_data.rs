//! LIN and CLS on random subsets of the tomography settings.

use tomocut::circuit::gen_cluster_unitary;
use tomocut::cut::CutSpec;
use tomocut::harness::{fit_all, CutCircuit};
use tomocut::knit::{full_distribution, trace_distance};
use tomocut::noise::NoiseSpec;
use tomocut::sim::ideal_distribution;
use tomocut::tomo::{collect_fragment_data, Fitter, Shots};

fn main() -> tomocut::Result<()> {
    let cut = CutCircuit::new(gen_cluster_unitary(4, 3, 5)?, CutSpec::middle_layer(4, 3)?, 12)?;
    let ideal = ideal_distribution(&cut.circuit)?;
    let noise = NoiseSpec::ideal();
    let data = cut
        .fragments
        .iter()
        .map(|f| collect_fragment_data(f, &noise, Shots::Finite(10000), 1))
        .collect::<tomocut::Result<Vec<_>>>()?;
    println!("{:>5} {:>8} {:>8}", "f", "LIN", "CLS");
    for f in [0.3, 0.5, 0.6, 0.8, 1.0] {
        let mut means = [0.0; 2];
        let masks = 10;
        for mask in 0..masks {
            let subset = data
                .iter()
                .map(|d| d.subsample(f, mask))
                .collect::<tomocut::Result<Vec<_>>>()?;
            for (slot, fitter) in [Fitter::Lin, Fitter::Cls].into_iter().enumerate() {
                let dist = full_distribution(&fit_all(fitter, &subset, &noise, false)?, &cut.graph)?;
                means[slot] += trace_distance(&dist.probabilities, &ideal)? / masks as f64;
            }
        }
        println!("{f:>5.1} {:>8.4} {:>8.4}", means[0], means[1]);
    }
    Ok(())
}
