//! Wire cuts and fragment extraction.
//!
//! A cut point splits one qubit's timeline between two gate layers. Each
//! resulting wire segment becomes a qubit of exactly one fragment; gates glue
//! segments together, and the connected components are the fragments.

use serde::{Deserialize, Serialize};

use crate::circuit::{gates, CircuitIR};
use crate::error::{Error, Result};
use crate::qmat::{ChoiKind, CMatrix};

/// A cut on `qubit` between layer `after_layer` and layer `after_layer + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CutPoint {
    pub qubit: usize,
    pub after_layer: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutSpec {
    pub points: Vec<CutPoint>,
}

impl CutSpec {
    pub fn new(points: Vec<CutPoint>) -> Self {
        Self { points }
    }

    /// Cuts the wire of qubit `n/2` immediately before and after every layer
    /// whose gate straddles the two halves of a brickwork circuit, so each
    /// straddling gate joins the left half through a short wire segment.
    ///
    /// For three layers and `n` divisible by four this is two cut points
    /// around the middle layer, leaving two one-in/one-out channel fragments.
    pub fn middle_layer(n: usize, layers: usize) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::Cut(format!("middle-layer cut needs even n >= 4, got {n}")));
        }
        let boundary = n / 2;
        let mut points = Vec::new();
        for layer in 0..layers {
            // Layer parity fixes the first qubit of each pair.
            if (boundary - 1) % 2 != layer % 2 {
                continue;
            }
            if layer == 0 {
                return Err(Error::Cut(
                    "a straddling gate in the first layer cannot be isolated by wire cuts".into(),
                ));
            }
            points.push(CutPoint {
                qubit: boundary,
                after_layer: layer - 1,
            });
            if layer + 1 < layers {
                points.push(CutPoint {
                    qubit: boundary,
                    after_layer: layer,
                });
            }
        }
        Ok(Self { points })
    }
}

/// A cut wire as seen from one fragment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutWire {
    /// Index of the cut point in the originating `CutSpec`.
    pub cut: usize,
    /// Qubit of the fragment circuit carrying this wire.
    pub local_qubit: usize,
}

/// A fragment qubit that carries one of the original terminal measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditioningQubit {
    pub original_qubit: usize,
    pub local_qubit: usize,
}

#[derive(Debug, Clone)]
pub struct Fragment {
    pub id: usize,
    pub circuit: CircuitIR,
    /// Cut wires receiving tomographic preparations, ordered by cut index.
    pub cut_inputs: Vec<CutWire>,
    /// Cut wires receiving tomographic measurements, ordered by cut index.
    pub cut_outputs: Vec<CutWire>,
    /// Ordered by original qubit index.
    pub conditioning: Vec<ConditioningQubit>,
}

impl Fragment {
    pub fn num_qubits(&self) -> usize {
        self.circuit.num_qubits()
    }

    pub fn num_in(&self) -> usize {
        self.cut_inputs.len()
    }

    pub fn num_out(&self) -> usize {
        self.cut_outputs.len()
    }

    /// Number of conditioning measurements `m`.
    pub fn num_conditioning(&self) -> usize {
        self.conditioning.len()
    }

    pub fn kind(&self) -> ChoiKind {
        ChoiKind::classify(self.num_in(), self.num_out())
    }

    /// Number of (preparation, basis) settings for full tomography.
    pub fn num_settings(&self) -> usize {
        4usize.pow(self.num_in() as u32) * 3usize.pow(self.num_out() as u32)
    }

    /// Splits a measured basis index over the fragment's local qubits
    /// (qubit 0 most significant) into cut-output bits `o` and conditioning
    /// bits `s`, both big-endian in their declared order.
    pub fn split_outcome(&self, local_index: usize) -> (usize, usize) {
        let n = self.num_qubits();
        let bit = |q: usize| (local_index >> (n - 1 - q)) & 1;
        let o = self
            .cut_outputs
            .iter()
            .fold(0, |acc, w| (acc << 1) | bit(w.local_qubit));
        let s = self
            .conditioning
            .iter()
            .fold(0, |acc, w| (acc << 1) | bit(w.local_qubit));
        (o, s)
    }

    /// Extracts this fragment's conditioning bits from a global outcome index
    /// over `n` original qubits.
    pub fn conditioning_bits(&self, global_index: usize, n: usize) -> usize {
        self.conditioning.iter().fold(0, |acc, w| {
            (acc << 1) | ((global_index >> (n - 1 - w.original_qubit)) & 1)
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    qubit: usize,
    start_cut: Option<usize>,
    end_cut: Option<usize>,
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut root = x;
    while parent[root] != root {
        root = parent[root];
    }
    let mut cur = x;
    while parent[cur] != root {
        let next = parent[cur];
        parent[cur] = root;
        cur = next;
    }
    root
}

/// Default bound on fragment width.
pub const DEFAULT_MAX_FRAGMENT_QUBITS: usize = 12;

/// Cuts `circuit` into fragments.
pub fn apply_cut(circuit: &CircuitIR, cuts: &CutSpec, max_fragment_qubits: usize) -> Result<Vec<Fragment>> {
    let n = circuit.num_qubits();
    let mut points: Vec<(usize, CutPoint)> = cuts.points.iter().copied().enumerate().collect();
    for (_, p) in &points {
        if p.qubit >= n {
            return Err(Error::Cut(format!("cut on qubit {} of {n}", p.qubit)));
        }
    }
    points.sort_by_key(|(_, p)| *p);
    if points.windows(2).any(|w| w[0].1 == w[1].1) {
        return Err(Error::Cut("duplicate cut point".into()));
    }

    // Segments per qubit, in time order.
    let mut segments: Vec<Segment> = Vec::new();
    let mut qubit_segments: Vec<Vec<(Option<usize>, usize)>> = vec![Vec::new(); n];
    for (q, segs) in qubit_segments.iter_mut().enumerate() {
        let mut start = None;
        for (idx, p) in points.iter().filter(|(_, p)| p.qubit == q) {
            segments.push(Segment {
                qubit: q,
                start_cut: start,
                end_cut: Some(*idx),
            });
            segs.push((Some(p.after_layer), segments.len() - 1));
            start = Some(*idx);
        }
        segments.push(Segment {
            qubit: q,
            start_cut: start,
            end_cut: None,
        });
        segs.push((None, segments.len() - 1));
    }
    let segment_of = |q: usize, layer: usize| -> usize {
        qubit_segments[q]
            .iter()
            .find(|(end, _)| end.is_none_or(|e| layer <= e))
            .map(|&(_, s)| s)
            .expect("last segment is unbounded")
    };

    let mut parent: Vec<usize> = (0..segments.len()).collect();
    let gate_segments: Vec<Vec<usize>> = circuit
        .gates()
        .iter()
        .map(|g| g.qubits.iter().map(|&q| segment_of(q, g.layer)).collect())
        .collect();
    for segs in &gate_segments {
        if segs.len() == 2 {
            let (a, b) = (find(&mut parent, segs[0]), find(&mut parent, segs[1]));
            parent[a] = b;
        }
    }

    // Components in order of their first segment.
    let mut component_ids: Vec<usize> = Vec::new();
    let mut fragment_of = vec![0usize; segments.len()];
    for s in 0..segments.len() {
        let root = find(&mut parent, s);
        let id = match component_ids.iter().position(|&r| r == root) {
            Some(id) => id,
            None => {
                component_ids.push(root);
                component_ids.len() - 1
            }
        };
        fragment_of[s] = id;
    }
    for (idx, _) in &points {
        let upstream = segments.iter().position(|s| s.end_cut == Some(*idx)).unwrap();
        let downstream = segments.iter().position(|s| s.start_cut == Some(*idx)).unwrap();
        if fragment_of[upstream] == fragment_of[downstream] {
            return Err(Error::Cut(format!(
                "cut {idx} does not separate the circuit (both sides in one fragment)"
            )));
        }
    }
    if component_ids.len() < 2 {
        return Err(Error::Cut("cuts leave a single fragment".into()));
    }

    let mut fragments = Vec::with_capacity(component_ids.len());
    for id in 0..component_ids.len() {
        let members: Vec<usize> = (0..segments.len()).filter(|&s| fragment_of[s] == id).collect();
        if members.len() > max_fragment_qubits {
            return Err(Error::Cut(format!(
                "fragment {id} needs {} qubits, limit is {max_fragment_qubits}",
                members.len()
            )));
        }
        let local = |s: usize| members.iter().position(|&m| m == s).unwrap();
        let mut sub = CircuitIR::new(members.len());
        for (g, segs) in circuit.gates().iter().zip(&gate_segments) {
            if fragment_of[segs[0]] != id {
                continue;
            }
            let qubits: Vec<usize> = segs.iter().map(|&s| local(s)).collect();
            sub.push(g.unitary.clone(), &qubits, g.layer)?;
        }
        let mut cut_inputs = Vec::new();
        let mut cut_outputs = Vec::new();
        let mut conditioning = Vec::new();
        for &s in &members {
            let seg = segments[s];
            if let Some(cut) = seg.start_cut {
                cut_inputs.push(CutWire {
                    cut,
                    local_qubit: local(s),
                });
            }
            match seg.end_cut {
                Some(cut) => cut_outputs.push(CutWire {
                    cut,
                    local_qubit: local(s),
                }),
                None => conditioning.push(ConditioningQubit {
                    original_qubit: seg.qubit,
                    local_qubit: local(s),
                }),
            }
        }
        cut_inputs.sort_by_key(|w| w.cut);
        cut_outputs.sort_by_key(|w| w.cut);
        conditioning.sort_by_key(|w| w.original_qubit);
        fragments.push(Fragment {
            id,
            circuit: sub,
            cut_inputs,
            cut_outputs,
            conditioning,
        });
    }
    Ok(fragments)
}

/// Single-qubit state preparations by index: |0>, |1>, |+>, |+i>.
pub fn preparation_state(index: usize) -> CMatrix {
    let v = preparation_unitary(index).column(0).into_owned();
    &v * v.adjoint()
}

/// Unitary taking |0> to the indexed preparation state.
pub fn preparation_unitary(index: usize) -> CMatrix {
    match index {
        0 => CMatrix::identity(2, 2),
        1 => gates::x(),
        2 => gates::h(),
        3 => gates::s() * gates::h(),
        _ => panic!("preparation index {index} out of range"),
    }
}

/// Rotation applied before a Z measurement to measure basis 0 = X, 1 = Y,
/// 2 = Z. Outcome 0 corresponds to the +1 eigenstate.
pub fn basis_rotation(index: usize) -> CMatrix {
    match index {
        0 => gates::h(),
        1 => gates::h() * gates::sdg(),
        2 => CMatrix::identity(2, 2),
        _ => panic!("basis index {index} out of range"),
    }
}

/// Runnable circuit for one tomography setting of a fragment.
pub fn fragment_circuit_instance(
    frag: &Fragment,
    prep_indices: &[usize],
    basis_indices: &[usize],
) -> Result<CircuitIR> {
    if prep_indices.len() != frag.num_in() || basis_indices.len() != frag.num_out() {
        return Err(Error::Parameter(format!(
            "fragment has {} cut inputs and {} cut outputs, got {} and {} indices",
            frag.num_in(),
            frag.num_out(),
            prep_indices.len(),
            basis_indices.len()
        )));
    }
    if let Some(i) = prep_indices.iter().find(|&&i| i > 3) {
        return Err(Error::Parameter(format!("preparation index {i} not in 0..4")));
    }
    if let Some(b) = basis_indices.iter().find(|&&b| b > 2) {
        return Err(Error::Parameter(format!("basis index {b} not in 0..3")));
    }
    let mut out = CircuitIR::new(frag.num_qubits());
    for (wire, &i) in frag.cut_inputs.iter().zip(prep_indices) {
        if i != 0 {
            out.push(preparation_unitary(i), &[wire.local_qubit], 0)?;
        }
    }
    for g in frag.circuit.gates() {
        out.push(g.unitary.clone(), &g.qubits, g.layer + 1)?;
    }
    let last = frag.circuit.num_layers() + 1;
    for (wire, &b) in frag.cut_outputs.iter().zip(basis_indices) {
        if b != 2 {
            out.push(basis_rotation(b), &[wire.local_qubit], last)?;
        }
    }
    Ok(out)
}

/// Mixed-radix decoding of a setting index into preparation (base 4) and
/// basis (base 3) tuples, first wire most significant.
pub fn decode_setting(index: usize, num_in: usize, num_out: usize) -> (Vec<usize>, Vec<usize>) {
    let per_prep = 3usize.pow(num_out as u32);
    let mut i = index / per_prep;
    let mut b = index % per_prep;
    let mut preps = vec![0; num_in];
    for slot in preps.iter_mut().rev() {
        *slot = i % 4;
        i /= 4;
    }
    let mut bases = vec![0; num_out];
    for slot in bases.iter_mut().rev() {
        *slot = b % 3;
        b /= 3;
    }
    (preps, bases)
}

pub fn encode_setting(preps: &[usize], bases: &[usize]) -> usize {
    let i = preps.iter().fold(0, |acc, &p| acc * 4 + p);
    let b = bases.iter().fold(0, |acc, &x| acc * 3 + x);
    i * 3usize.pow(bases.len() as u32) + b
}

/// Four-qubit GHZ preparation: H on qubit 0, then a CNOT chain.
pub fn ghz4() -> CircuitIR {
    let mut c = CircuitIR::new(4);
    c.push(gates::h(), &[0], 0).unwrap();
    c.push(gates::cnot(), &[0, 1], 1).unwrap();
    c.push(gates::cnot(), &[1, 2], 2).unwrap();
    c.push(gates::cnot(), &[2, 3], 3).unwrap();
    c
}

/// Cuts for `ghz4` yielding a state, a channel, and a POVM fragment.
pub fn ghz4_chain_cut() -> CutSpec {
    CutSpec::new(vec![
        CutPoint {
            qubit: 1,
            after_layer: 1,
        },
        CutPoint {
            qubit: 2,
            after_layer: 2,
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::gen_cluster_unitary;
    use crate::qmat::{max_abs_diff, trace};

    #[test]
    fn cluster_middle_cut_gives_two_channel_fragments() {
        for (n, m) in [(4, 2), (8, 4), (12, 6)] {
            let circuit = gen_cluster_unitary(n, 3, 1).unwrap();
            let cuts = CutSpec::middle_layer(n, 3).unwrap();
            assert_eq!(cuts.points.len(), 2);
            let frags = apply_cut(&circuit, &cuts, DEFAULT_MAX_FRAGMENT_QUBITS).unwrap();
            assert_eq!(frags.len(), 2);
            for f in &frags {
                assert_eq!(f.kind(), ChoiKind::Channel);
                assert_eq!((f.num_in(), f.num_out()), (1, 1));
                assert_eq!(f.num_conditioning(), m);
            }
            let total: usize = frags.iter().map(|f| f.circuit.gates().len()).sum();
            assert_eq!(total, circuit.gates().len());
            let mut measured: Vec<usize> = frags
                .iter()
                .flat_map(|f| f.conditioning.iter().map(|c| c.original_qubit))
                .collect();
            measured.sort();
            assert_eq!(measured, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn cut_edges_link_output_to_input() {
        let circuit = gen_cluster_unitary(4, 3, 2).unwrap();
        let frags = apply_cut(&circuit, &CutSpec::middle_layer(4, 3).unwrap(), 12).unwrap();
        for cut in 0..2 {
            let ups: Vec<_> = frags.iter().filter(|f| f.cut_outputs.iter().any(|w| w.cut == cut)).collect();
            let downs: Vec<_> = frags.iter().filter(|f| f.cut_inputs.iter().any(|w| w.cut == cut)).collect();
            assert_eq!(ups.len(), 1);
            assert_eq!(downs.len(), 1);
            assert_ne!(ups[0].id, downs[0].id);
        }
    }

    #[test]
    fn ghz_chain_kinds() {
        let frags = apply_cut(&ghz4(), &ghz4_chain_cut(), 12).unwrap();
        let kinds: Vec<_> = frags.iter().map(|f| f.kind()).collect();
        assert_eq!(kinds, vec![ChoiKind::State, ChoiKind::Channel, ChoiKind::PovmElement]);
    }

    #[test]
    fn empty_cut_rejected() {
        let circuit = gen_cluster_unitary(4, 3, 1).unwrap();
        assert!(matches!(apply_cut(&circuit, &CutSpec::default(), 12), Err(Error::Cut(_))));
    }

    #[test]
    fn non_separating_cut_rejected() {
        let circuit = gen_cluster_unitary(4, 3, 1).unwrap();
        // Cutting qubit 0 between layers 0 and 2 leaves it joined through qubit 1.
        let cuts = CutSpec::new(vec![CutPoint { qubit: 0, after_layer: 1 }]);
        assert!(matches!(apply_cut(&circuit, &cuts, 12), Err(Error::Cut(_))));
    }

    #[test]
    fn width_limit_enforced() {
        let circuit = gen_cluster_unitary(8, 3, 1).unwrap();
        let cuts = CutSpec::middle_layer(8, 3).unwrap();
        assert!(matches!(apply_cut(&circuit, &cuts, 4), Err(Error::Cut(_))));
    }

    #[test]
    fn instance_enumeration() {
        let circuit = gen_cluster_unitary(4, 3, 3).unwrap();
        let frags = apply_cut(&circuit, &CutSpec::middle_layer(4, 3).unwrap(), 12).unwrap();
        let f = &frags[0];
        assert_eq!(f.num_settings(), 12);
        let mut seen = Vec::new();
        for idx in 0..f.num_settings() {
            let (p, b) = decode_setting(idx, f.num_in(), f.num_out());
            assert_eq!(encode_setting(&p, &b), idx);
            let inst = fragment_circuit_instance(f, &p, &b).unwrap();
            seen.push(inst.gates().len());
        }
        assert_eq!(seen.len(), 12);
        // Prep |0>, basis Z: body only.
        let plain = fragment_circuit_instance(f, &[0], &[2]).unwrap();
        assert_eq!(plain.gates().len(), f.circuit.gates().len());
        assert!(fragment_circuit_instance(f, &[4], &[0]).is_err());
        assert!(fragment_circuit_instance(f, &[0], &[3]).is_err());
    }

    #[test]
    fn preparations_are_pure_states() {
        let expected_bloch = [(0.0, 0.0, 1.0), (0.0, 0.0, -1.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0)];
        for (i, &(x, y, z)) in expected_bloch.iter().enumerate() {
            let rho = preparation_state(i);
            assert!((trace(&rho).re - 1.0).abs() < 1e-14);
            let bloch = |k: usize| trace(&(crate::qmat::pauli(k) * &rho)).re;
            assert!((bloch(1) - x).abs() < 1e-12);
            assert!((bloch(2) - y).abs() < 1e-12);
            assert!((bloch(3) - z).abs() < 1e-12);
        }
    }

    #[test]
    fn basis_rotations_map_eigenstates_to_zero() {
        // +1 eigenstates of X, Y, Z must rotate to |0>.
        for (b, prep) in [(0, 2), (1, 3), (2, 0)] {
            let u = basis_rotation(b);
            let rho = preparation_state(prep);
            let out = &u * rho * u.adjoint();
            assert!(max_abs_diff(&out, &preparation_state(0)) < 1e-12);
        }
    }
}
