use tomocut::circuit::gen_cluster_unitary;
use tomocut::cut::{apply_cut, ghz4, ghz4_chain_cut, CutSpec, DEFAULT_MAX_FRAGMENT_QUBITS};
use tomocut::knit::*;
use tomocut::noise::{make_assignment, NoiseSpec};
use tomocut::sim::{ideal_distribution, outcome_distribution, sample_counts, simulate_density_matrix};
use tomocut::tomo::exact_conditional_tensors;

#[test]
fn ghz_chain_reconstructs_exactly() {
    let frags = apply_cut(&ghz4(), &ghz4_chain_cut(), DEFAULT_MAX_FRAGMENT_QUBITS).unwrap();
    assert_eq!(frags.len(), 3);
    let graph = CutGraph::from_fragments(&frags).unwrap();
    let tensors: Vec<_> = frags
        .iter()
        .map(|f| exact_conditional_tensors(f, &NoiseSpec::ideal()).unwrap())
        .collect();
    let p0000 = contract(&tensors, &graph, 0).unwrap();
    assert!((p0000 - 0.5).abs() < 1e-12);
    assert!((contract(&tensors, &graph, 0b1111).unwrap() - 0.5).abs() < 1e-12);
    let dist = full_distribution(&tensors, &graph).unwrap();
    assert!((dist.pre_norm_mass - 1.0).abs() < 1e-12);
    let (z1, count) = pauli_expectation(&tensors, &graph, "ZIII").unwrap();
    assert!(z1.abs() < 1e-12);
    assert_eq!(count, 2);
    let (z12, count) = pauli_expectation(&tensors, &graph, "ZZII").unwrap();
    assert!((z12 - 1.0).abs() < 1e-12);
    assert_eq!(count, 4);
}

#[test]
fn cluster_cut_matches_uncut_simulation() {
    for (n, seed) in [(4, 0), (8, 7)] {
        let circuit = gen_cluster_unitary(n, 3, seed).unwrap();
        let frags = apply_cut(&circuit, &CutSpec::middle_layer(n, 3).unwrap(), DEFAULT_MAX_FRAGMENT_QUBITS).unwrap();
        let graph = CutGraph::from_fragments(&frags).unwrap();
        let tensors: Vec<_> = frags
            .iter()
            .map(|f| exact_conditional_tensors(f, &NoiseSpec::ideal()).unwrap())
            .collect();
        let dist = full_distribution(&tensors, &graph).unwrap();
        let truth = ideal_distribution(&circuit).unwrap();
        let worst = dist
            .probabilities
            .iter()
            .zip(&truth)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "n={n}: {worst}");
        // Z expectations agree with the brute-force marginal.
        let label: String = (0..n).map(|q| if q == 0 || q == n - 1 { 'Z' } else { 'I' }).collect();
        let (value, _) = pauli_expectation(&tensors, &graph, &label).unwrap();
        let direct: f64 = truth
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let parity = ((i >> (n - 1)) ^ i) & 1;
                if parity == 0 { *p } else { -*p }
            })
            .sum();
        assert!((value - direct).abs() < 1e-9);
    }
}

#[test]
fn bell_readout_mitigation_converges() {
    let mut bell = tomocut::circuit::CircuitIR::new(2);
    bell.push(tomocut::circuit::gates::h(), &[0], 0).unwrap();
    bell.push(tomocut::circuit::gates::cnot(), &[0, 1], 1).unwrap();
    let a = make_assignment(0.05).unwrap();
    let rho = simulate_density_matrix(&bell, &NoiseSpec::ideal()).unwrap();
    let noisy = outcome_distribution(&rho, Some(&a));
    let mut rng = tomocut::seed::stream(11, &[0]);
    let counts: Vec<f64> = sample_counts(&noisy, 1_000_000, &mut rng)
        .into_iter()
        .map(|c| c as f64)
        .collect();
    let fixed = mitigate_readout_uncut(&counts, &[a, a]).unwrap();
    let raw = empirical_distribution(&counts).unwrap();
    let target = [0.5, 0.0, 0.0, 0.5];
    assert!(trace_distance(&fixed.probabilities, &target).unwrap() < 5e-3);
    assert!(trace_distance(&raw.probabilities, &target).unwrap() > 0.08);
}
