//! Readout error on its own: CLS, the readout-aware MEMCLS fitter, and the
//! A-matrix inverse on the uncut circuit.

use tomocut::circuit::{gates, CircuitIR};
use tomocut::knit::{empirical_distribution, mitigate_readout_uncut, trace_distance};
use tomocut::noise::{make_assignment, NoiseSpec};
use tomocut::sim::{outcome_distribution, sample_counts, simulate_density_matrix};
use tomocut::tomo::{collect_fragment_data, fit_cls, fit_memcls, ClsOptions, Shots};

fn main() -> tomocut::Result<()> {
    let mut bell = CircuitIR::new(2);
    bell.push(gates::h(), &[0], 0)?;
    bell.push(gates::cnot(), &[0, 1], 1)?;
    let a = make_assignment(0.05)?;
    let noisy = outcome_distribution(&simulate_density_matrix(&bell, &NoiseSpec::ideal())?, Some(&a));
    let counts: Vec<f64> = sample_counts(&noisy, 10000, &mut tomocut::seed::stream(1, &[]))
        .into_iter()
        .map(|c| c as f64)
        .collect();
    let ideal = [0.5, 0.0, 0.0, 0.5];
    println!("Bell state, p_meas = 0.05, 10000 shots");
    println!("  raw        {:.4}", trace_distance(&empirical_distribution(&counts)?.probabilities, &ideal)?);
    println!("  A-inverse  {:.4}", trace_distance(&mitigate_readout_uncut(&counts, &[a, a])?.probabilities, &ideal)?);

    let circuit = tomocut::circuit::gen_cluster_unitary(8, 3, 4)?;
    let frags = tomocut::cut::apply_cut(&circuit, &tomocut::cut::CutSpec::middle_layer(8, 3)?, 12)?;
    let noise = NoiseSpec::readout_only(0.05)?;
    let frag = &frags[0];
    let truth = tomocut::tomo::exact_conditional_tensors(frag, &NoiseSpec::ideal())?;
    let data = collect_fragment_data(frag, &noise, Shots::Finite(10000), 5)?;
    let distance = |tensors: &[tomocut::qmat::ChoiTensor]| {
        tensors.iter().zip(&truth).map(|(a, b)| a.distance(b)).sum::<f64>()
    };
    let cls = fit_cls(&data, &ClsOptions::default())?;
    let mem = fit_memcls(&data, &a, &ClsOptions::default())?;
    println!("\n8-qubit cluster fragment 0, summed tensor distance to the noiseless tensors");
    println!("  CLS     {:.4} ({} iterations)", distance(&cls.tensors), cls.diagnostics.iterations);
    println!("  MEMCLS  {:.4} ({} iterations)", distance(&mem.tensors), mem.diagnostics.iterations);
    Ok(())
}
