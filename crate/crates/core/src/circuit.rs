//! Circuit intermediate representation and the cluster-unitary generator.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::{c, real_matrix, unitarity_deviation, CMatrix, ONE, UNITARY_TOL, ZERO};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateClass {
    OneQubit,
    TwoQubit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub unitary: CMatrix,
    /// Target qubits; the first is the most significant factor of `unitary`.
    pub qubits: Vec<usize>,
    pub layer: usize,
}

impl Gate {
    pub fn class(&self) -> GateClass {
        if self.qubits.len() == 1 {
            GateClass::OneQubit
        } else {
            GateClass::TwoQubit
        }
    }
}

/// Gate list on `n` qubits, executed in order, with terminal Z measurements
/// on every qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitIR {
    num_qubits: usize,
    gates: Vec<Gate>,
}

impl CircuitIR {
    pub fn new(num_qubits: usize) -> Self {
        Self {
            num_qubits,
            gates: Vec::new(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn num_layers(&self) -> usize {
        self.gates.iter().map(|g| g.layer + 1).max().unwrap_or(0)
    }

    /// Appends a validated gate.
    pub fn push(&mut self, unitary: CMatrix, qubits: &[usize], layer: usize) -> Result<()> {
        if qubits.is_empty() || qubits.len() > 2 {
            return Err(Error::Circuit(format!(
                "gates act on one or two qubits, got {}",
                qubits.len()
            )));
        }
        if let Some(&q) = qubits.iter().find(|&&q| q >= self.num_qubits) {
            return Err(Error::Circuit(format!(
                "qubit {q} out of range for {} qubits",
                self.num_qubits
            )));
        }
        if qubits.len() == 2 && qubits[0] == qubits[1] {
            return Err(Error::Circuit("two-qubit gate on a single qubit".into()));
        }
        let dim = 1 << qubits.len();
        if unitary.shape() != (dim, dim) {
            return Err(Error::Dimension(format!(
                "gate on {} qubits needs a {dim}x{dim} matrix",
                qubits.len()
            )));
        }
        let deviation = unitarity_deviation(&unitary);
        if deviation > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        self.gates.push(Gate {
            unitary,
            qubits: qubits.to_vec(),
            layer,
        });
        Ok(())
    }

    pub fn to_doc(&self) -> CircuitDoc {
        CircuitDoc {
            num_qubits: self.num_qubits,
            gates: self
                .gates
                .iter()
                .map(|g| GateDoc {
                    qubits: g.qubits.clone(),
                    layer: g.layer,
                    matrix: g
                        .unitary
                        .transpose()
                        .iter()
                        .map(|z| [z.re, z.im])
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_doc(doc: &CircuitDoc) -> Result<Self> {
        let mut circuit = CircuitIR::new(doc.num_qubits);
        for g in &doc.gates {
            let dim = 1usize << g.qubits.len();
            if g.matrix.len() != dim * dim {
                return Err(Error::Parse(format!(
                    "gate matrix has {} entries, expected {}",
                    g.matrix.len(),
                    dim * dim
                )));
            }
            let u = CMatrix::from_row_iterator(dim, dim, g.matrix.iter().map(|e| c(e[0], e[1])));
            circuit.push(u, &g.qubits, g.layer)?;
        }
        Ok(circuit)
    }
}

/// JSON form of a gate; the matrix is row-major `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateDoc {
    pub qubits: Vec<usize>,
    pub layer: usize,
    pub matrix: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CircuitDoc {
    pub num_qubits: usize,
    pub gates: Vec<GateDoc>,
}

/// Haar-random unitary: QR of a complex Gaussian matrix with the phases of
/// `R`'s diagonal folded back into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Brickwork circuit of Haar-random two-qubit gates. Layer `l` (0-based)
/// pairs `(0,1), (2,3), ...` when `l` is even and `(1,2), (3,4), ...` when odd.
pub fn gen_cluster_unitary(n: usize, layers: usize, seed: u64) -> Result<CircuitIR> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::Parameter(format!(
            "cluster circuits need an even qubit count >= 2, got {n}"
        )));
    }
    if layers == 0 {
        return Err(Error::Parameter("cluster circuits need at least one layer".into()));
    }
    let mut circuit = CircuitIR::new(n);
    let mut index = 0u64;
    for layer in 0..layers {
        let start = layer % 2;
        let mut q = start;
        while q + 1 < n {
            let mut rng = seed::stream(seed, &[index]);
            circuit.push(haar_unitary(4, &mut rng), &[q, q + 1], layer)?;
            index += 1;
            q += 2;
        }
    }
    Ok(circuit)
}

/// Common fixed gates.
pub mod gates {
    use super::*;

    pub fn x() -> CMatrix {
        real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0])
    }

    pub fn h() -> CMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        real_matrix(2, 2, &[s, s, s, -s])
    }

    pub fn s() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, c(0.0, 1.0)])
    }

    pub fn sdg() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, c(0.0, -1.0)])
    }

    /// CNOT with the first qubit as control.
    pub fn cnot() -> CMatrix {
        real_matrix(
            4,
            4,
            &[
                1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0,
            ],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::max_abs_diff;

    #[test]
    fn brickwork_gate_counts() {
        assert_eq!(gen_cluster_unitary(4, 3, 1).unwrap().gates().len(), 5);
        assert_eq!(gen_cluster_unitary(8, 3, 1).unwrap().gates().len(), 11);
    }

    #[test]
    fn brickwork_is_nearest_neighbour() {
        let circuit = gen_cluster_unitary(8, 5, 9).unwrap();
        for g in circuit.gates() {
            assert_eq!(g.qubits[1], g.qubits[0] + 1);
            assert_eq!(g.qubits[0] % 2, g.layer % 2);
            assert!(unitarity_deviation(&g.unitary) < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_gates() {
        let a = gen_cluster_unitary(6, 3, 77).unwrap();
        let b = gen_cluster_unitary(6, 3, 77).unwrap();
        assert_eq!(a, b);
        let other = gen_cluster_unitary(6, 3, 78).unwrap();
        assert!(max_abs_diff(&a.gates()[0].unitary, &other.gates()[0].unitary) > 1e-3);
    }

    #[test]
    fn rejects_odd_and_empty() {
        assert!(gen_cluster_unitary(5, 3, 0).is_err());
        assert!(gen_cluster_unitary(4, 0, 0).is_err());
    }

    #[test]
    fn haar_first_moment_vanishes() {
        // E[U] = 0 for the Haar measure; the empirical mean shrinks like 1/sqrt(N).
        let mut rng = seed::stream(3, &[]);
        let mut acc = CMatrix::zeros(2, 2);
        let samples = 4000;
        for _ in 0..samples {
            acc += haar_unitary(2, &mut rng);
        }
        acc /= c(samples as f64, 0.0);
        assert!(acc.iter().all(|z| z.norm() < 0.05));
    }

    #[test]
    fn push_validates() {
        let mut circuit = CircuitIR::new(2);
        assert!(circuit.push(gates::h(), &[2], 0).is_err());
        assert!(circuit.push(gates::cnot(), &[1, 1], 0).is_err());
        assert!(circuit.push(real_matrix(2, 2, &[1.0, 1.0, 0.0, 1.0]), &[0], 0).is_err());
        assert!(circuit.push(gates::cnot(), &[0, 1], 0).is_ok());
    }

    #[test]
    fn doc_round_trip() {
        let circuit = gen_cluster_unitary(4, 3, 5).unwrap();
        let json = serde_json::to_string(&circuit.to_doc()).unwrap();
        let back = CircuitIR::from_doc(&serde_json::from_str(&json).unwrap()).unwrap();
        for (a, b) in circuit.gates().iter().zip(back.gates()) {
            assert!(max_abs_diff(&a.unitary, &b.unitary) < 1e-15);
            assert_eq!(a.qubits, b.qubits);
        }
    }
}
