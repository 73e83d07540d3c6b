//! Dense density-matrix simulation with per-gate noise, readout mixing and
//! multinomial shot sampling.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::circuit::{CircuitIR, Gate, GateClass};
use crate::error::{Error, Result};
use crate::noise::{superoperator_of, AssignmentMatrix, NoiseSpec};
use crate::qmat::{CMatrix, CVector, ONE, ZERO};

/// Default bound on simulated width.
pub const DEFAULT_MAX_SIM_QUBITS: usize = 12;

fn check_width(n: usize, max_qubits: usize) -> Result<()> {
    if n > max_qubits {
        return Err(Error::Parameter(format!(
            "{n}-qubit simulation exceeds the {max_qubits}-qubit limit"
        )));
    }
    Ok(())
}

/// Superoperator of one gate followed by its gate-class noise.
fn gate_superoperator(gate: &Gate, noise: &NoiseSpec) -> CMatrix {
    let mut s = superoperator_of(std::slice::from_ref(&gate.unitary));
    let channel = match gate.class() {
        GateClass::OneQubit => noise.one_qubit.as_ref(),
        GateClass::TwoQubit => noise.two_qubit.as_ref(),
    };
    if let Some(ch) = channel {
        let sn = ch.superoperator();
        for _ in 0..noise.multiplicity.max(1) {
            s = &sn * s;
        }
    }
    s
}

/// Applies a column-stacked local superoperator on `qubits` to a `D x D`
/// operator over `n` qubits, qubit 0 most significant.
fn apply_local_superop(x: &mut CMatrix, n: usize, qubits: &[usize], s: &CMatrix) {
    let k = qubits.len();
    let dl = 1usize << k;
    let offsets: Vec<usize> = (0..dl)
        .map(|l| {
            qubits.iter().enumerate().fold(0, |acc, (j, &q)| {
                let bit = (l >> (k - 1 - j)) & 1;
                acc | (bit << (n - 1 - q))
            })
        })
        .collect();
    let mask = offsets.iter().fold(0, |a, &o| a | o);
    let rest: Vec<usize> = (0..1usize << n).filter(|i| i & mask == 0).collect();
    let mut v = CVector::zeros(dl * dl);
    for &cc in &rest {
        for &rr in &rest {
            for b in 0..dl {
                for a in 0..dl {
                    v[a + dl * b] = x[(rr + offsets[a], cc + offsets[b])];
                }
            }
            let w = s * &v;
            for b in 0..dl {
                for a in 0..dl {
                    x[(rr + offsets[a], cc + offsets[b])] = w[a + dl * b];
                }
            }
        }
    }
}

/// Evolves an arbitrary operator through the noisy circuit. Linear in `x`.
pub fn evolve_operator(circuit: &CircuitIR, noise: &NoiseSpec, x: CMatrix) -> Result<CMatrix> {
    let n = circuit.num_qubits();
    let d = 1usize << n;
    if x.shape() != (d, d) {
        return Err(Error::Dimension(format!("operator must be {d}x{d}")));
    }
    let mut x = x;
    for gate in circuit.gates() {
        apply_local_superop(&mut x, n, &gate.qubits, &gate_superoperator(gate, noise));
    }
    Ok(x)
}

/// Output state of the noisy circuit started in `|0...0>`.
pub fn simulate_density_matrix(circuit: &CircuitIR, noise: &NoiseSpec) -> Result<CMatrix> {
    simulate_density_matrix_bounded(circuit, noise, DEFAULT_MAX_SIM_QUBITS)
}

pub fn simulate_density_matrix_bounded(
    circuit: &CircuitIR,
    noise: &NoiseSpec,
    max_qubits: usize,
) -> Result<CMatrix> {
    let n = circuit.num_qubits();
    check_width(n, max_qubits)?;
    let d = 1usize << n;
    let mut rho = CMatrix::zeros(d, d);
    rho[(0, 0)] = ONE;
    evolve_operator(circuit, noise, rho)
}

/// Noiseless pure-state evolution from `|0...0>`.
pub fn simulate_statevector(circuit: &CircuitIR) -> Result<CVector> {
    let n = circuit.num_qubits();
    check_width(n, 24)?;
    let d = 1usize << n;
    let mut psi = CVector::from_element(d, ZERO);
    psi[0] = ONE;
    for gate in circuit.gates() {
        let k = gate.qubits.len();
        let dl = 1usize << k;
        let offsets: Vec<usize> = (0..dl)
            .map(|l| {
                gate.qubits.iter().enumerate().fold(0, |acc, (j, &q)| {
                    acc | (((l >> (k - 1 - j)) & 1) << (n - 1 - q))
                })
            })
            .collect();
        let mask = offsets.iter().fold(0, |a, &o| a | o);
        let mut local = CVector::zeros(dl);
        for base in (0..d).filter(|i| i & mask == 0) {
            for (a, &o) in offsets.iter().enumerate() {
                local[a] = psi[base + o];
            }
            let out = &gate.unitary * &local;
            for (a, &o) in offsets.iter().enumerate() {
                psi[base + o] = out[a];
            }
        }
    }
    Ok(psi)
}

/// Exact noiseless output distribution of the uncut circuit.
pub fn ideal_distribution(circuit: &CircuitIR) -> Result<Vec<f64>> {
    Ok(simulate_statevector(circuit)?.iter().map(|z| z.norm_sqr()).collect())
}

/// Applies the same assignment matrix to every qubit of a distribution over
/// `n` bits.
pub fn apply_readout(probs: &[f64], a: &AssignmentMatrix) -> Vec<f64> {
    apply_per_qubit(probs, &a.0)
}

/// Applies a 2x2 matrix along every bit axis of a length `2^n` vector.
pub(crate) fn apply_per_qubit(v: &[f64], m: &[[f64; 2]; 2]) -> Vec<f64> {
    let mut out = v.to_vec();
    let len = out.len();
    let mut stride = 1;
    while stride < len {
        for base in 0..len {
            if base & stride == 0 {
                let (x0, x1) = (out[base], out[base | stride]);
                out[base] = m[0][0] * x0 + m[0][1] * x1;
                out[base | stride] = m[1][0] * x0 + m[1][1] * x1;
            }
        }
        stride <<= 1;
    }
    out
}

/// Measured distribution of `rho` under the noise spec's readout model.
pub fn outcome_distribution(rho: &CMatrix, readout: Option<&AssignmentMatrix>) -> Vec<f64> {
    let diag: Vec<f64> = (0..rho.nrows()).map(|i| rho[(i, i)].re.max(0.0)).collect();
    let total: f64 = diag.iter().sum();
    let diag: Vec<f64> = diag.iter().map(|p| p / total).collect();
    match readout {
        Some(a) => apply_readout(&diag, a),
        None => diag,
    }
}

/// Multinomial counts drawn as a chain of conditional binomials.
pub fn sample_counts<R: Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = shots;
    let mut mass = 1.0f64;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() || mass <= 0.0 {
            counts[i] = remaining;
            break;
        }
        let q = (p.max(0.0) / mass).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, q).expect("valid binomial").sample(rng);
        counts[i] = k;
        remaining -= k;
        mass -= p.max(0.0);
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{gates, gen_cluster_unitary};
    use crate::noise::{make_channel, ChannelKind, NoiseChannel};
    use crate::qmat::{max_abs_diff, trace};
    use crate::seed;

    fn depol_spec(p1: f64, p2: f64) -> NoiseSpec {
        NoiseSpec {
            one_qubit: Some(NoiseChannel::new(make_channel(&ChannelKind::Depolarizing { p: p1, qubits: 1 }).unwrap()).unwrap()),
            two_qubit: Some(NoiseChannel::new(make_channel(&ChannelKind::Depolarizing { p: p2, qubits: 2 }).unwrap()).unwrap()),
            readout: None,
            multiplicity: 1,
        }
    }

    #[test]
    fn empty_circuit_stays_in_ground_state() {
        let rho = simulate_density_matrix(&CircuitIR::new(3), &NoiseSpec::ideal()).unwrap();
        assert_eq!(rho[(0, 0)], ONE);
        assert!((trace(&rho).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bell_state_diagonal() {
        let mut c = CircuitIR::new(2);
        c.push(gates::h(), &[0], 0).unwrap();
        c.push(gates::cnot(), &[0, 1], 1).unwrap();
        let p = outcome_distribution(&simulate_density_matrix(&c, &NoiseSpec::ideal()).unwrap(), None);
        let want = [0.5, 0.0, 0.0, 0.5];
        assert!(p.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn x_gate_with_depolarizing() {
        let mut c = CircuitIR::new(1);
        c.push(gates::x(), &[0], 0).unwrap();
        let p = 0.1;
        let rho = simulate_density_matrix(&c, &depol_spec(p, 0.0)).unwrap();
        assert!((rho[(0, 0)].re - p / 2.0).abs() < 1e-14);
        assert!((rho[(1, 1)].re - (1.0 - p / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn noiseless_matches_statevector() {
        let c = gen_cluster_unitary(6, 4, 11).unwrap();
        let rho = simulate_density_matrix(&c, &NoiseSpec::ideal()).unwrap();
        let psi = simulate_statevector(&c).unwrap();
        assert!(max_abs_diff(&rho, &(&psi * psi.adjoint())) < 1e-12);
    }

    #[test]
    fn noisy_output_is_a_state() {
        let c = gen_cluster_unitary(4, 3, 2).unwrap();
        let rho = simulate_density_matrix(&c, &depol_spec(1e-4, 0.05)).unwrap();
        assert!((trace(&rho).re - 1.0).abs() < 1e-10);
        assert!(crate::qmat::max_asymmetry(&rho) < 1e-12);
        assert!(crate::qmat::eig_hermitian(&rho).unwrap().min() > -1e-10);
    }

    #[test]
    fn noise_on_non_adjacent_reversed_qubits() {
        // Gate qubit order matters: compare against the explicit Kraus sum.
        let mut c = CircuitIR::new(3);
        c.push(gates::h(), &[2], 0).unwrap();
        c.push(gates::cnot(), &[2, 0], 1).unwrap();
        let ad = NoiseChannel::new(make_channel(&ChannelKind::AmplitudeDamping { gamma: 0.3, qubits: 2 }).unwrap()).unwrap();
        let spec = NoiseSpec { two_qubit: Some(ad.clone()), multiplicity: 1, ..Default::default() };
        let rho = simulate_density_matrix(&c, &spec).unwrap();
        // Reference: permute qubits so the gate acts on (0, 1) of the order (2, 0, 1).
        let mut r = CircuitIR::new(3);
        r.push(gates::h(), &[0], 0).unwrap();
        r.push(gates::cnot(), &[0, 1], 1).unwrap();
        let rr = simulate_density_matrix(&r, &spec).unwrap();
        // Map index (q0 q1 q2) of `c` to (q2 q0 q1) of `r`.
        let perm = |i: usize| ((i & 1) << 2) | (i >> 1);
        for i in 0..8 {
            for j in 0..8 {
                assert!((rho[(i, j)] - rr[(perm(i), perm(j))]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn readout_on_basis_state() {
        let mut rho = CMatrix::zeros(2, 2);
        rho[(0, 0)] = ONE;
        let a = crate::noise::make_assignment(0.05).unwrap();
        let p = outcome_distribution(&rho, Some(&a));
        assert!((p[0] - 0.95).abs() < 1e-15 && (p[1] - 0.05).abs() < 1e-15);
        assert_eq!(outcome_distribution(&rho, None), vec![1.0, 0.0]);
    }

    #[test]
    fn readout_mixing_is_tensor_product() {
        let a = crate::noise::make_assignment(0.1).unwrap();
        let p = apply_readout(&[1.0, 0.0, 0.0, 0.0], &a);
        let want = [0.81, 0.09, 0.09, 0.01];
        assert!(p.iter().zip(want).all(|(x, y)| (x - y).abs() < 1e-14));
    }

    #[test]
    fn sampling_is_deterministic_and_complete() {
        let probs = [0.1, 0.2, 0.3, 0.4];
        let a = sample_counts(&probs, 10_000, &mut seed::stream(5, &[1]));
        let b = sample_counts(&probs, 10_000, &mut seed::stream(5, &[1]));
        assert_eq!(a, b);
        assert_eq!(a.iter().sum::<u64>(), 10_000);
        for (c, p) in a.iter().zip(probs) {
            assert!((*c as f64 / 1e4 - p).abs() < 0.02);
        }
    }

    #[test]
    fn width_limit() {
        let c = CircuitIR::new(5);
        assert!(simulate_density_matrix_bounded(&c, &NoiseSpec::ideal(), 4).is_err());
    }
}
