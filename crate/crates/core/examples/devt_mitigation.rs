//! Dominant eigenvalue truncation on fragments under depolarizing gate noise
//! and readout error.

use tomocut::circuit::gen_cluster_unitary;
use tomocut::cut::CutSpec;
use tomocut::harness::{fit_all, uncut_baseline, CutCircuit};
use tomocut::knit::{full_distribution, trace_distance};
use tomocut::noise::NoiseConfig;
use tomocut::sim::ideal_distribution;
use tomocut::tomo::{collect_fragment_data, Fitter, Shots};

fn main() -> tomocut::Result<()> {
    let noise: NoiseConfig = serde_json::from_str(
        r#"{"two_qubit": {"kind": "depolarizing", "p": 0.02},
            "one_qubit": {"kind": "depolarizing", "p": 0.0001, "qubits": 1},
            "p_meas": 0.05}"#,
    )?;
    let spec = noise.build()?;
    println!("noise: {}", noise.label());
    for n in [4, 8] {
        let cut = CutCircuit::new(gen_cluster_unitary(n, 3, 2)?, CutSpec::middle_layer(n, 3)?, 12)?;
        let ideal = ideal_distribution(&cut.circuit)?;
        let data = cut
            .fragments
            .iter()
            .map(|f| collect_fragment_data(f, &spec, Shots::Finite(10000), 3))
            .collect::<tomocut::Result<Vec<_>>>()?;
        for fitter in [Fitter::Lin, Fitter::Cls, Fitter::Memcls] {
            for devt in [false, true] {
                let dist = full_distribution(&fit_all(fitter, &data, &spec, devt)?, &cut.graph)?;
                let label = format!("{fitter}{}", if devt { "+DEVT" } else { "" });
                println!("n={n} {label:<12} {:.4}", trace_distance(&dist.probabilities, &ideal)?);
            }
        }
        let (raw, mitigated) = uncut_baseline(&cut.circuit, &spec, Shots::Finite(10000), 3)?;
        println!("n={n} {:<12} {:.4}", "uncut", trace_distance(&raw.probabilities, &ideal)?);
        println!("n={n} {:<12} {:.4}", "uncut+MEM", trace_distance(&mitigated.probabilities, &ideal)?);
    }
    Ok(())
}
