//! Contraction of fitted fragment tensors back into output distributions.

use std::collections::{BTreeMap, VecDeque};

use num_complex::Complex64;

use crate::cut::Fragment;
use crate::error::{Error, Result};
use crate::noise::AssignmentMatrix;
use crate::qmat::{ChoiTensor, ZERO};

/// One side of a cut wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Axis {
    pub wire: usize,
    pub col: bool,
}

/// Dense tensor with one binary axis per label; the first axis is the most
/// significant index bit.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledTensor {
    pub axes: Vec<Axis>,
    pub data: Vec<Complex64>,
}

impl LabelledTensor {
    pub fn scalar(value: Complex64) -> Self {
        Self {
            axes: Vec::new(),
            data: vec![value],
        }
    }

    /// Views a Choi matrix over `inputs ++ outputs` (rows, then columns).
    pub fn from_choi(t: &ChoiTensor, inputs: &[usize], outputs: &[usize]) -> Result<Self> {
        if inputs.len() != t.num_in() || outputs.len() != t.num_out() {
            return Err(Error::Contraction(format!(
                "tensor has {} inputs and {} outputs, graph expects {} and {}",
                t.num_in(),
                t.num_out(),
                inputs.len(),
                outputs.len()
            )));
        }
        let wires: Vec<usize> = inputs.iter().chain(outputs).copied().collect();
        let axes: Vec<Axis> = wires
            .iter()
            .map(|&wire| Axis { wire, col: false })
            .chain(wires.iter().map(|&wire| Axis { wire, col: true }))
            .collect();
        let d = t.matrix().nrows();
        let mut data = Vec::with_capacity(d * d);
        for r in 0..d {
            for c in 0..d {
                data.push(t.matrix()[(r, c)]);
            }
        }
        Ok(Self { axes, data })
    }

    fn bit(index: usize, pos: usize, len: usize) -> usize {
        (index >> (len - 1 - pos)) & 1
    }

    /// Sums over every axis shared by the two tensors.
    pub fn contract(&self, other: &Self) -> Self {
        let shared: Vec<(usize, usize)> = self
            .axes
            .iter()
            .enumerate()
            .filter_map(|(i, a)| other.axes.iter().position(|b| b == a).map(|j| (i, j)))
            .collect();
        let left_only: Vec<usize> = (0..self.axes.len())
            .filter(|i| !shared.iter().any(|(a, _)| a == i))
            .collect();
        let right_only: Vec<usize> = (0..other.axes.len())
            .filter(|j| !shared.iter().any(|(_, b)| b == j))
            .collect();
        let axes: Vec<Axis> = left_only
            .iter()
            .map(|&i| self.axes[i])
            .chain(right_only.iter().map(|&j| other.axes[j]))
            .collect();
        let (la, lb, ns) = (self.axes.len(), other.axes.len(), shared.len());
        let (nl, nr) = (left_only.len(), right_only.len());
        let mut data = vec![ZERO; 1 << axes.len()];
        for (out_idx, slot) in data.iter_mut().enumerate() {
            let mut base_a = 0;
            for (k, &i) in left_only.iter().enumerate() {
                base_a |= Self::bit(out_idx, k, nl + nr) << (la - 1 - i);
            }
            let mut base_b = 0;
            for (k, &j) in right_only.iter().enumerate() {
                base_b |= Self::bit(out_idx, nl + k, nl + nr) << (lb - 1 - j);
            }
            let mut acc = ZERO;
            for sh in 0..1usize << ns {
                let (mut ia, mut ib) = (base_a, base_b);
                for (k, &(i, j)) in shared.iter().enumerate() {
                    let v = Self::bit(sh, k, ns);
                    ia |= v << (la - 1 - i);
                    ib |= v << (lb - 1 - j);
                }
                acc += self.data[ia] * other.data[ib];
            }
            *slot = acc;
        }
        Self { axes, data }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphNode {
    pub fragment_id: usize,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    pub conditioning: Vec<usize>,
}

impl GraphNode {
    fn bits(&self, global: usize, n: usize) -> usize {
        self.conditioning
            .iter()
            .fold(0, |acc, &q| (acc << 1) | ((global >> (n - 1 - q)) & 1))
    }
}

/// Fragments joined by cut edges, with a fold order in which each step
/// shares a wire with what has been contracted so far.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutGraph {
    pub nodes: Vec<GraphNode>,
    /// `(cut, upstream node, downstream node)`.
    pub edges: Vec<(usize, usize, usize)>,
    pub order: Vec<usize>,
    pub num_qubits: usize,
}

impl CutGraph {
    pub fn from_fragments(fragments: &[Fragment]) -> Result<Self> {
        let nodes: Vec<GraphNode> = fragments
            .iter()
            .map(|f| GraphNode {
                fragment_id: f.id,
                inputs: f.cut_inputs.iter().map(|w| w.cut).collect(),
                outputs: f.cut_outputs.iter().map(|w| w.cut).collect(),
                conditioning: f.conditioning.iter().map(|c| c.original_qubit).collect(),
            })
            .collect();
        Self::new(nodes)
    }

    pub fn new(nodes: Vec<GraphNode>) -> Result<Self> {
        let mut up: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut down: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (k, node) in nodes.iter().enumerate() {
            for &c in &node.outputs {
                up.entry(c).or_default().push(k);
            }
            for &c in &node.inputs {
                down.entry(c).or_default().push(k);
            }
        }
        let mut edges = Vec::new();
        for cut in up.keys().chain(down.keys()).copied().collect::<std::collections::BTreeSet<_>>() {
            match (up.get(&cut).map(Vec::as_slice), down.get(&cut).map(Vec::as_slice)) {
                (Some([u]), Some([d])) => edges.push((cut, *u, *d)),
                _ => {
                    return Err(Error::Contraction(format!(
                        "cut edge {cut} is dangling or used more than once"
                    )))
                }
            }
        }
        let mut conditioning: Vec<usize> = nodes.iter().flat_map(|n| n.conditioning.clone()).collect();
        conditioning.sort_unstable();
        let num_qubits = conditioning.len();
        if conditioning.iter().enumerate().any(|(i, &q)| i != q) {
            return Err(Error::Contraction(
                "conditioning qubits must cover each original qubit exactly once".into(),
            ));
        }
        // Breadth-first fold order starting from node 0.
        let mut order = Vec::with_capacity(nodes.len());
        let mut seen = vec![false; nodes.len()];
        for start in 0..nodes.len() {
            if seen[start] {
                continue;
            }
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(k) = queue.pop_front() {
                order.push(k);
                for &(_, u, d) in &edges {
                    for (a, b) in [(u, d), (d, u)] {
                        if a == k && !seen[b] {
                            seen[b] = true;
                            queue.push_back(b);
                        }
                    }
                }
            }
        }
        Ok(Self {
            nodes,
            edges,
            order,
            num_qubits,
        })
    }

    fn check(&self, tensors: &[Vec<ChoiTensor>]) -> Result<()> {
        if tensors.len() != self.nodes.len() {
            return Err(Error::Contraction(format!(
                "{} tensor sets for {} fragments",
                tensors.len(),
                self.nodes.len()
            )));
        }
        for (node, set) in self.nodes.iter().zip(tensors) {
            if set.len() != 1 << node.conditioning.len() {
                return Err(Error::Contraction(format!(
                    "fragment {} needs {} conditional tensors, got {}",
                    node.fragment_id,
                    1usize << node.conditioning.len(),
                    set.len()
                )));
            }
        }
        Ok(())
    }

    fn fold(&self, pick: impl Fn(usize) -> Result<LabelledTensor>) -> Result<f64> {
        let mut acc = LabelledTensor::scalar(crate::qmat::ONE);
        for &k in &self.order {
            acc = acc.contract(&pick(k)?);
        }
        if !acc.axes.is_empty() {
            return Err(Error::Contraction("open wires remain after contraction".into()));
        }
        Ok(acc.data[0].re)
    }
}

/// Raw (unnormalized) probability of the global outcome `s`.
pub fn contract(tensors: &[Vec<ChoiTensor>], graph: &CutGraph, s: usize) -> Result<f64> {
    graph.check(tensors)?;
    let n = graph.num_qubits;
    graph.fold(|k| {
        let node = &graph.nodes[k];
        LabelledTensor::from_choi(&tensors[k][node.bits(s, n)], &node.inputs, &node.outputs)
    })
}

/// Provenance of a distribution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DistributionMeta {
    pub fitter: Option<String>,
    pub devt: bool,
    pub noise: Option<String>,
    pub shots: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    pub probabilities: Vec<f64>,
    /// Sum of the raw values before clamping and renormalization.
    pub pre_norm_mass: f64,
    pub meta: DistributionMeta,
}

impl OutcomeDistribution {
    /// Clamps negatives and renormalizes.
    pub fn from_raw(raw: Vec<f64>) -> Result<Self> {
        let mass: f64 = raw.iter().sum();
        let clamped: Vec<f64> = raw.iter().map(|&x| x.max(0.0)).collect();
        let kept: f64 = clamped.iter().sum();
        if !(mass > 0.0) || !(kept > 0.0) {
            return Err(Error::NonPositiveMass { mass });
        }
        Ok(Self {
            probabilities: clamped.into_iter().map(|x| x / kept).collect(),
            pre_norm_mass: mass,
            meta: DistributionMeta::default(),
        })
    }

    pub fn with_meta(mut self, meta: DistributionMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        trace_distance(&self.probabilities, &other.probabilities)
    }
}

/// Evaluates all `2^n` outcomes.
pub fn full_distribution(tensors: &[Vec<ChoiTensor>], graph: &CutGraph) -> Result<OutcomeDistribution> {
    graph.check(tensors)?;
    let n = graph.num_qubits;
    let nodes = &graph.nodes;
    // Pre-build every labelled tensor once.
    let labelled: Vec<Vec<LabelledTensor>> = nodes
        .iter()
        .zip(tensors)
        .map(|(node, set)| {
            set.iter()
                .map(|t| LabelledTensor::from_choi(t, &node.inputs, &node.outputs))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let raw = (0..1usize << n)
        .map(|s| graph.fold(|k| Ok(labelled[k][nodes[k].bits(s, n)].clone())))
        .collect::<Result<Vec<f64>>>()?;
    OutcomeDistribution::from_raw(raw)
}

/// `1/2 sum |p - q|`.
pub fn trace_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension(format!(
            "distributions of length {} and {}",
            p.len(),
            q.len()
        )));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Expectation of a Z-type Pauli string over the original qubits, e.g.
/// `"IZZI"`. Conditioning outcomes outside the support are summed inside
/// each fragment first. Returns the value and the number of network
/// contractions performed for the support.
pub fn pauli_expectation(
    tensors: &[Vec<ChoiTensor>],
    graph: &CutGraph,
    observable: &str,
) -> Result<(f64, usize)> {
    graph.check(tensors)?;
    let n = graph.num_qubits;
    if observable.chars().count() != n {
        return Err(Error::Parameter(format!("observable {observable:?} is not {n} letters")));
    }
    let mut support = Vec::new();
    for (q, ch) in observable.chars().enumerate() {
        match ch.to_ascii_uppercase() {
            'I' => {}
            'Z' => support.push(q),
            other => {
                return Err(Error::Unsupported(format!(
                    "non-diagonal Pauli {other:?} on qubit {q}"
                )))
            }
        }
    }
    // Per fragment: tensors indexed by the bits of its supported qubits.
    let marginal: Vec<Vec<LabelledTensor>> = graph
        .nodes
        .iter()
        .zip(tensors)
        .map(|(node, set)| {
            let local: Vec<usize> = node
                .conditioning
                .iter()
                .enumerate()
                .filter(|(_, q)| support.contains(q))
                .map(|(j, _)| j)
                .collect();
            let m = node.conditioning.len();
            let mut sums: Vec<Option<crate::qmat::CMatrix>> = vec![None; 1 << local.len()];
            for (s, t) in set.iter().enumerate() {
                let key = local.iter().fold(0, |acc, &j| (acc << 1) | ((s >> (m - 1 - j)) & 1));
                let slot = &mut sums[key];
                *slot = Some(match slot.take() {
                    Some(acc) => acc + t.matrix(),
                    None => t.matrix().clone(),
                });
            }
            sums.into_iter()
                .map(|mtx| {
                    let t = ChoiTensor::new(set[0].num_in(), set[0].num_out(), mtx.expect("every key is hit"))?;
                    LabelledTensor::from_choi(&t, &node.inputs, &node.outputs)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let d = support.len();
    let mut total = 0.0;
    let mut signed = 0.0;
    for bits in 0..1usize << d {
        // Scatter the support bits into a global outcome index.
        let global = support
            .iter()
            .enumerate()
            .fold(0, |acc, (k, &q)| acc | (((bits >> (d - 1 - k)) & 1) << (n - 1 - q)));
        let value = graph.fold(|k| {
            let node = &graph.nodes[k];
            let key = node
                .conditioning
                .iter()
                .filter(|q| support.contains(q))
                .fold(0, |acc, &q| (acc << 1) | ((global >> (n - 1 - q)) & 1));
            Ok(marginal[k][key].clone())
        })?;
        total += value;
        signed += if bits.count_ones() % 2 == 0 { value } else { -value };
    }
    if !(total > 0.0) {
        return Err(Error::NonPositiveMass { mass: total });
    }
    Ok((signed / total, 1 << d))
}

fn apply_per_qubit_list(v: &[f64], mats: &[[[f64; 2]; 2]]) -> Vec<f64> {
    let n = mats.len();
    let mut out = v.to_vec();
    for (q, m) in mats.iter().enumerate() {
        let stride = 1usize << (n - 1 - q);
        for base in 0..out.len() {
            if base & stride == 0 {
                let (x0, x1) = (out[base], out[base | stride]);
                out[base] = m[0][0] * x0 + m[0][1] * x1;
                out[base | stride] = m[1][0] * x0 + m[1][1] * x1;
            }
        }
    }
    out
}

/// Applies `(A_0 kron ... kron A_{n-1})^-1` to empirical counts of the uncut
/// circuit, then clamps and renormalizes.
pub fn mitigate_readout_uncut(counts: &[f64], assignments: &[AssignmentMatrix]) -> Result<OutcomeDistribution> {
    let n = assignments.len();
    if counts.len() != 1 << n {
        return Err(Error::Dimension(format!(
            "{} counts for {n} assignment matrices",
            counts.len()
        )));
    }
    let total: f64 = counts.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NonPositiveMass { mass: total });
    }
    let inverses = assignments
        .iter()
        .map(|a| a.inverse())
        .collect::<Result<Vec<_>>>()?;
    let empirical: Vec<f64> = counts.iter().map(|c| c / total).collect();
    OutcomeDistribution::from_raw(apply_per_qubit_list(&empirical, &inverses))
}

/// Normalized empirical distribution without mitigation.
pub fn empirical_distribution(counts: &[f64]) -> Result<OutcomeDistribution> {
    let total: f64 = counts.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NonPositiveMass { mass: total });
    }
    OutcomeDistribution::from_raw(counts.iter().map(|c| c / total).collect())
}
