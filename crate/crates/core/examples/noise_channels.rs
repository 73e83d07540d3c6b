//! Noise channel families, their fidelities, and Pauli / Clifford twirls.

use tomocut::mitigation::pta_bias_threshold;
use tomocut::noise::{average_gate_fidelity, clifford_twirl, make_channel, pauli_twirl, ChannelKind};

fn main() -> tomocut::Result<()> {
    let kinds = [
        ChannelKind::Depolarizing { p: 0.01, qubits: 2 },
        ChannelKind::BiasedPauli { p: 0.01, b: 0.5, qubits: 2 },
        ChannelKind::AmplitudeDamping { gamma: 0.01, qubits: 2 },
        ChannelKind::CoherentCnot { delta_theta: std::f64::consts::PI / 32.0 },
    ];
    for kind in &kinds {
        let choi = make_channel(kind)?;
        println!(
            "{:<40} F_avg = {:.6}  CTA depolarizing p = {:.3e}",
            kind.label(),
            average_gate_fidelity(&choi),
            clifford_twirl(&choi)
        );
    }
    println!("\nPauli twirl of single-qubit amplitude damping");
    println!("{:>7} {:>11} {:>11} {:>10} {:>10}", "gamma", "p_x", "p_z", "b", "-b/4");
    for gamma in [0.001, 0.01, 0.1] {
        let pta = pauli_twirl(&make_channel(&ChannelKind::AmplitudeDamping { gamma, qubits: 1 })?)?;
        let (px, pz) = (pta.get("X")?, pta.get("Z")?);
        let b = pz / px - 1.0;
        println!("{gamma:>7} {px:>11.4e} {pz:>11.4e} {b:>10.6} {:>10.6}", pta_bias_threshold(b)?);
    }
    Ok(())
}
