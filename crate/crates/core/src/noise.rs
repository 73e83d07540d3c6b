//! Noise channels, twirling approximations and readout assignment matrices.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::{
    exp_i_hermitian, kron_all, matrix_log_unitary, omega, pauli, pauli_string, real_matrix,
    trace, ChoiTensor, CMatrix,
};
use crate::circuit::gates;

const PAULI_LETTERS: [char; 4] = ['I', 'X', 'Y', 'Z'];

/// Probabilities of an `n`-qubit Pauli channel `rho -> sum_P p_P P rho P`.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliChannelParams {
    num_qubits: usize,
    /// Indexed by base-4 digits, qubit 0 most significant; entry 0 is `p_I`.
    probs: Vec<f64>,
}

impl PauliChannelParams {
    /// Builds from the non-identity probabilities; `p_I = 1 - sum`.
    pub fn new(num_qubits: usize, errors: &BTreeMap<String, f64>) -> Result<Self> {
        let mut probs = vec![0.0; 4usize.pow(num_qubits as u32)];
        for (label, &p) in errors {
            let idx = label_index(label, num_qubits)?;
            if idx == 0 {
                return Err(Error::Parameter("identity probability is implied".into()));
            }
            probs[idx] = p;
        }
        probs[0] = 1.0 - probs[1..].iter().sum::<f64>();
        Self::from_vec(num_qubits, probs)
    }

    pub fn from_vec(num_qubits: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 4usize.pow(num_qubits as u32) {
            return Err(Error::Dimension("Pauli probability vector length".into()));
        }
        if probs.iter().any(|&p| !(-1e-12..=1.0 + 1e-12).contains(&p)) {
            return Err(Error::Parameter(format!("Pauli probabilities out of [0,1]: {probs:?}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!("Pauli probabilities sum to {total}")));
        }
        Ok(Self { num_qubits, probs })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of the Pauli with the given label, e.g. `"X"` or `"IZ"`.
    pub fn get(&self, label: &str) -> Result<f64> {
        Ok(self.probs[label_index(label, self.num_qubits)?])
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.probs.len()).map(|i| index_label(i, self.num_qubits)).collect()
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        self.labels().into_iter().zip(self.probs.iter().copied()).collect()
    }

    pub fn to_choi(&self) -> ChoiTensor {
        let kraus: Vec<CMatrix> = self
            .probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, &p)| pauli_string(&digits(i, self.num_qubits)).scale(p.sqrt()))
            .collect();
        ChoiTensor::from_kraus(&kraus).expect("Pauli channel is CPTP")
    }
}

fn digits(index: usize, n: usize) -> Vec<usize> {
    (0..n).map(|q| (index >> (2 * (n - 1 - q))) & 3).collect()
}

fn index_label(index: usize, n: usize) -> String {
    digits(index, n).into_iter().map(|d| PAULI_LETTERS[d]).collect()
}

fn label_index(label: &str, n: usize) -> Result<usize> {
    if label.chars().count() != n {
        return Err(Error::Parameter(format!("Pauli label {label:?} is not {n} letters")));
    }
    label.chars().try_fold(0usize, |acc, ch| {
        let d = PAULI_LETTERS
            .iter()
            .position(|&l| l == ch.to_ascii_uppercase())
            .ok_or_else(|| Error::Parameter(format!("bad Pauli letter {ch:?}")))?;
        Ok(acc * 4 + d)
    })
}

/// `+1` when the Paulis commute, `-1` otherwise.
fn commutation_sign(a: usize, b: usize, n: usize) -> f64 {
    let anti = digits(a, n)
        .into_iter()
        .zip(digits(b, n))
        .filter(|&(x, y)| x != 0 && y != 0 && x != y)
        .count();
    if anti % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Parametrized channel families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChannelKind {
    /// `rho -> (1-p) rho + p I/d` on `qubits` qubits.
    Depolarizing {
        p: f64,
        #[serde(default = "two")]
        qubits: usize,
    },
    /// Tensor power of `(1-(3+b)p) rho + p X rho X + p Y rho Y + p(1+b) Z rho Z`.
    BiasedPauli {
        p: f64,
        b: f64,
        #[serde(default = "two")]
        qubits: usize,
    },
    /// Tensor power of single-qubit amplitude damping.
    AmplitudeDamping {
        gamma: f64,
        #[serde(default = "two")]
        qubits: usize,
    },
    /// Two-qubit unitary `exp(-i dtheta H_CNOT)`, `H_CNOT = log(CNOT)/(-i)`.
    CoherentCnot { delta_theta: f64 },
    /// Explicit Pauli channel; keys are Pauli labels, identity implied.
    Pauli { probs: BTreeMap<String, f64> },
}

fn two() -> usize {
    2
}

impl ChannelKind {
    pub fn num_qubits(&self) -> usize {
        match self {
            ChannelKind::Depolarizing { qubits, .. }
            | ChannelKind::BiasedPauli { qubits, .. }
            | ChannelKind::AmplitudeDamping { qubits, .. } => *qubits,
            ChannelKind::CoherentCnot { .. } => 2,
            ChannelKind::Pauli { probs } => probs.keys().next().map_or(1, |k| k.chars().count()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ChannelKind::Depolarizing { p, .. } => format!("depolarizing(p={p})"),
            ChannelKind::BiasedPauli { p, b, .. } => format!("biased-pauli(p={p};b={b})"),
            ChannelKind::AmplitudeDamping { gamma, .. } => format!("amplitude-damping(gamma={gamma})"),
            ChannelKind::CoherentCnot { delta_theta } => format!("coherent-cnot(dtheta={delta_theta})"),
            ChannelKind::Pauli { probs } => {
                let body: Vec<String> = probs.iter().map(|(k, v)| format!("{k}={v}")).collect();
                format!("pauli({})", body.join(";"))
            }
        }
    }
}

fn tensor_power_kraus(single: &[CMatrix], n: usize) -> Vec<CMatrix> {
    let mut out = vec![CMatrix::identity(1, 1)];
    for _ in 0..n {
        out = out
            .iter()
            .flat_map(|a| single.iter().map(move |k| a.kronecker(k)))
            .collect();
    }
    out
}

/// Kraus operators of the amplitude damping channel.
pub fn amplitude_damping_kraus(gamma: f64) -> [CMatrix; 2] {
    [
        real_matrix(2, 2, &[1.0, 0.0, 0.0, (1.0 - gamma).sqrt()]),
        real_matrix(2, 2, &[0.0, gamma.sqrt(), 0.0, 0.0]),
    ]
}

/// Generator `H_CNOT = log(U_CNOT)/(-i)`. With the principal branch this is
/// `-pi |1><1| kron |-><-|`, so `exp(-i dtheta H_CNOT) = exp(i dtheta pi P)`.
pub fn cnot_generator() -> CMatrix {
    // log(U) = iK with K Hermitian; log(U)/(-i) = -K.
    -matrix_log_unitary(&gates::cnot()).expect("CNOT is unitary")
}

/// Kraus representation of a channel family.
pub fn channel_kraus(kind: &ChannelKind) -> Result<Vec<CMatrix>> {
    let in_unit = |x: f64, what: &str| -> Result<()> {
        if (0.0..=1.0).contains(&x) {
            Ok(())
        } else {
            Err(Error::Parameter(format!("{what} = {x} not in [0,1]")))
        }
    };
    match kind {
        ChannelKind::Depolarizing { p, qubits } => {
            in_unit(*p, "depolarizing p")?;
            let n = *qubits;
            let d2 = 4f64.powi(n as i32);
            Ok((0..4usize.pow(n as u32))
                .map(|i| {
                    let w = if i == 0 { 1.0 - p + p / d2 } else { p / d2 };
                    pauli_string(&digits(i, n)).scale(w.sqrt())
                })
                .filter(|k| k.norm() > 0.0)
                .collect())
        }
        ChannelKind::BiasedPauli { p, b, qubits } => {
            if *p < 0.0 || (3.0 + b) * p > 1.0 || (1.0 + b) * p < 0.0 {
                return Err(Error::Parameter(format!("biased Pauli p={p}, b={b} invalid")));
            }
            let weights = [1.0 - (3.0 + b) * p, *p, *p, p * (1.0 + b)];
            let single: Vec<CMatrix> = weights
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > 0.0)
                .map(|(i, &w)| pauli(i).scale(w.sqrt()))
                .collect();
            Ok(tensor_power_kraus(&single, *qubits))
        }
        ChannelKind::AmplitudeDamping { gamma, qubits } => {
            in_unit(*gamma, "amplitude damping gamma")?;
            Ok(tensor_power_kraus(&amplitude_damping_kraus(*gamma), *qubits))
        }
        ChannelKind::CoherentCnot { delta_theta } => {
            if !delta_theta.is_finite() {
                return Err(Error::Parameter("coherent rotation angle must be finite".into()));
            }
            Ok(vec![exp_i_hermitian(&cnot_generator(), -delta_theta)?])
        }
        ChannelKind::Pauli { probs } => {
            let params = PauliChannelParams::new(kind.num_qubits(), probs)?;
            params.to_choi().to_kraus()
        }
    }
}

/// Choi matrix of a channel family.
pub fn make_channel(kind: &ChannelKind) -> Result<ChoiTensor> {
    ChoiTensor::from_kraus(&channel_kraus(kind)?)
}

/// Pauli-transfer-matrix diagonal `R_P = Tr[P E(P)] / d`.
pub fn ptm_diagonal(channel: &ChoiTensor) -> Result<Vec<f64>> {
    let n = channel.num_in();
    if channel.num_out() != n {
        return Err(Error::Dimension("PTM needs a channel with equal in/out width".into()));
    }
    let d = (1usize << n) as f64;
    (0..4usize.pow(n as u32))
        .map(|i| {
            let p = pauli_string(&digits(i, n));
            Ok(trace(&(&p * channel.apply(&p)?)).re / d)
        })
        .collect()
}

/// Pauli-twirled approximation: the Pauli channel sharing the input
/// channel's Pauli-transfer-matrix diagonal.
pub fn pauli_twirl(channel: &ChoiTensor) -> Result<PauliChannelParams> {
    let n = channel.num_in();
    if n > 2 {
        return Err(Error::Unsupported("Pauli twirl implemented for n <= 2".into()));
    }
    let ptm = ptm_diagonal(channel)?;
    let size = ptm.len();
    let d2 = size as f64;
    let mut probs: Vec<f64> = (0..size)
        .map(|q| (0..size).map(|p| commutation_sign(p, q, n) * ptm[p]).sum::<f64>() / d2)
        .collect();
    if let Some(worst) = probs.iter().copied().reduce(f64::min) {
        if worst < -1e-6 {
            return Err(Error::Parameter(format!(
                "twirled channel has negative Pauli probability {worst:.3e}"
            )));
        }
    }
    for p in probs.iter_mut() {
        if *p < -1e-12 {
            *p = 0.0;
        }
        *p = p.max(0.0);
    }
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    PauliChannelParams::from_vec(n, probs)
}

/// Process fidelity with the identity, `<<I|L|I>> / d^2`.
pub fn process_fidelity(channel: &ChoiTensor) -> f64 {
    let w = omega(channel.num_in());
    let d = channel.dim_in() as f64;
    (w.adjoint() * channel.matrix() * &w)[(0, 0)].re / (d * d)
}

/// Average gate fidelity `(d F_pro + 1) / (d + 1)`.
pub fn average_gate_fidelity(channel: &ChoiTensor) -> f64 {
    let d = channel.dim_in() as f64;
    (d * process_fidelity(channel) + 1.0) / (d + 1.0)
}

/// Clifford-twirled approximation: depolarizing probability with the same
/// average gate fidelity as `channel`.
pub fn clifford_twirl(channel: &ChoiTensor) -> f64 {
    let d = channel.dim_in() as f64;
    // Depolarizing p has F_pro = 1 - p + p/d^2.
    (1.0 - process_fidelity(channel)) / (1.0 - 1.0 / (d * d))
}

/// Single-qubit readout confusion matrix, `A[s][t] = P(record s | true t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssignmentMatrix(pub [[f64; 2]; 2]);

impl AssignmentMatrix {
    pub fn identity() -> Self {
        Self([[1.0, 0.0], [0.0, 1.0]])
    }

    /// Validates column-stochasticity.
    pub fn new(entries: [[f64; 2]; 2]) -> Result<Self> {
        for col in 0..2 {
            let sum = entries[0][col] + entries[1][col];
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Parameter(format!("assignment column {col} sums to {sum}")));
            }
        }
        if entries.iter().flatten().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::Parameter("assignment entries must lie in [0,1]".into()));
        }
        Ok(Self(entries))
    }

    pub fn get(&self, recorded: usize, actual: usize) -> f64 {
        self.0[recorded][actual]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn inverse(&self) -> Result<[[f64; 2]; 2]> {
        let det = self.det();
        if det.abs() < 1e-12 {
            return Err(Error::SingularAssignment { det });
        }
        let a = self.0;
        Ok([[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]])
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        let m = nalgebra::Matrix2::new(self.0[0][0], self.0[0][1], self.0[1][0], self.0[1][1]);
        m.singular_values().max()
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    pub fn as_matrix(&self) -> CMatrix {
        real_matrix(2, 2, &[self.0[0][0], self.0[0][1], self.0[1][0], self.0[1][1]])
    }
}

impl fmt::Display for AssignmentMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Symmetric readout error `[[1-p, p], [p, 1-p]]`.
pub fn make_assignment(p_meas: f64) -> Result<AssignmentMatrix> {
    if !(0.0..=0.5).contains(&p_meas) {
        return Err(Error::Parameter(format!("p_meas = {p_meas} not in [0, 0.5]")));
    }
    AssignmentMatrix::new([[1.0 - p_meas, p_meas], [p_meas, 1.0 - p_meas]])
}

/// A channel together with the derived forms the simulator needs.
#[derive(Debug, Clone)]
pub struct NoiseChannel {
    pub choi: ChoiTensor,
    pub kraus: Vec<CMatrix>,
}

impl NoiseChannel {
    pub fn new(choi: ChoiTensor) -> Result<Self> {
        if !choi.is_cptp() {
            return Err(Error::Parameter(format!(
                "noise channel must be CPTP (min eigenvalue {:.3e}, TP deviation {:.3e})",
                choi.min_eigenvalue(),
                choi.tp_deviation()
            )));
        }
        let kraus = choi.to_kraus()?;
        Ok(Self { choi, kraus })
    }

    pub fn num_qubits(&self) -> usize {
        self.choi.num_in()
    }

    /// Column-stacking superoperator `sum_k conj(K) kron K`.
    pub fn superoperator(&self) -> CMatrix {
        superoperator_of(&self.kraus)
    }
}

pub fn superoperator_of(kraus: &[CMatrix]) -> CMatrix {
    let d = kraus[0].nrows();
    kraus.iter().fold(CMatrix::zeros(d * d, d * d), |acc, k| {
        acc + k.map(|z| z.conj()).kronecker(k)
    })
}

/// Local Markovian noise attached to abstract gates plus classical readout
/// error on every measured qubit.
#[derive(Debug, Clone, Default)]
pub struct NoiseSpec {
    pub two_qubit: Option<NoiseChannel>,
    pub one_qubit: Option<NoiseChannel>,
    pub readout: Option<AssignmentMatrix>,
    /// Applications of the gate-class channel per gate.
    pub multiplicity: usize,
}

impl NoiseSpec {
    pub fn ideal() -> Self {
        Self {
            multiplicity: 1,
            ..Default::default()
        }
    }

    pub fn readout_only(p_meas: f64) -> Result<Self> {
        Ok(Self {
            readout: Some(make_assignment(p_meas)?),
            multiplicity: 1,
            ..Default::default()
        })
    }

    pub fn is_ideal(&self) -> bool {
        self.two_qubit.is_none()
            && self.one_qubit.is_none()
            && self.readout.is_none_or(|a| a.is_identity())
    }

    pub fn without_readout(&self) -> Self {
        Self {
            readout: None,
            ..self.clone()
        }
    }

    pub fn assignment(&self) -> AssignmentMatrix {
        self.readout.unwrap_or_else(AssignmentMatrix::identity)
    }
}

/// Twirling applied to configured gate channels before simulation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Twirl {
    #[default]
    None,
    /// Pauli-twirled approximation.
    Pta,
    /// Clifford-twirled approximation.
    Cta,
}

/// Serializable noise description used in harness configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub two_qubit: Option<ChannelKind>,
    #[serde(default)]
    pub one_qubit: Option<ChannelKind>,
    #[serde(default)]
    pub p_meas: f64,
    #[serde(default = "one")]
    pub multiplicity: usize,
    #[serde(default)]
    pub twirl: Twirl,
}

fn one() -> usize {
    1
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            two_qubit: None,
            one_qubit: None,
            p_meas: 0.0,
            multiplicity: 1,
            twirl: Twirl::None,
        }
    }
}

impl NoiseConfig {
    pub fn build(&self) -> Result<NoiseSpec> {
        let twirled = |kind: &ChannelKind, expected: usize| -> Result<NoiseChannel> {
            if kind.num_qubits() != expected {
                return Err(Error::Parameter(format!(
                    "{} acts on {} qubits, gate class needs {expected}",
                    kind.label(),
                    kind.num_qubits()
                )));
            }
            let choi = make_channel(kind)?;
            let choi = match self.twirl {
                Twirl::None => choi,
                Twirl::Pta => pauli_twirl(&choi)?.to_choi(),
                Twirl::Cta => make_channel(&ChannelKind::Depolarizing {
                    p: clifford_twirl(&choi).clamp(0.0, 1.0),
                    qubits: expected,
                })?,
            };
            NoiseChannel::new(choi)
        };
        Ok(NoiseSpec {
            two_qubit: self.two_qubit.as_ref().map(|k| twirled(k, 2)).transpose()?,
            one_qubit: self.one_qubit.as_ref().map(|k| twirled(k, 1)).transpose()?,
            readout: if self.p_meas > 0.0 {
                Some(make_assignment(self.p_meas)?)
            } else {
                None
            },
            multiplicity: self.multiplicity.max(1),
        })
    }

    /// Short stable description used as the noise identifier in reports.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(k) = &self.two_qubit {
            parts.push(format!("2q:{}", k.label()));
        }
        if let Some(k) = &self.one_qubit {
            parts.push(format!("1q:{}", k.label()));
        }
        if self.p_meas > 0.0 {
            parts.push(format!("meas:{}", self.p_meas));
        }
        if self.multiplicity > 1 {
            parts.push(format!("x{}", self.multiplicity));
        }
        match self.twirl {
            Twirl::None => {}
            Twirl::Pta => parts.push("pta".into()),
            Twirl::Cta => parts.push("cta".into()),
        }
        if parts.is_empty() {
            "ideal".into()
        } else {
            parts.join(" ")
        }
    }

    /// The family name of the two-qubit channel, or `"none"`.
    pub fn kind_name(&self) -> &'static str {
        match &self.two_qubit {
            None if self.p_meas > 0.0 => "readout",
            None => "none",
            Some(ChannelKind::Depolarizing { .. }) => "depolarizing",
            Some(ChannelKind::BiasedPauli { .. }) => "biased-pauli",
            Some(ChannelKind::AmplitudeDamping { .. }) => "amplitude-damping",
            Some(ChannelKind::CoherentCnot { .. }) => "coherent-cnot",
            Some(ChannelKind::Pauli { .. }) => "pauli",
        }
    }
}

/// Depolarizing channel on `n` qubits expressed via `kron_all`, used by tests
/// as an independent construction.
#[doc(hidden)]
pub fn depolarizing_by_twirl(p: f64, n: usize) -> ChoiTensor {
    let d = 1usize << n;
    let id = ChoiTensor::identity(n).into_matrix();
    let mixed = kron_all(std::iter::repeat_n(CMatrix::identity(2, 2), 2 * n)).scale(1.0 / d as f64);
    ChoiTensor::new(n, n, id.scale(1.0 - p) + mixed.scale(p)).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::{apply_kraus, c, max_abs_diff};

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn depolarizing_zero_is_identity() {
        let choi = make_channel(&ChannelKind::Depolarizing { p: 0.0, qubits: 2 }).unwrap();
        assert!(max_abs_diff(choi.matrix(), ChoiTensor::identity(2).matrix()) < 1e-14);
    }

    #[test]
    fn depolarizing_matches_mixture_form() {
        for n in 1..=2 {
            let choi = make_channel(&ChannelKind::Depolarizing { p: 0.3, qubits: n }).unwrap();
            assert!(max_abs_diff(choi.matrix(), depolarizing_by_twirl(0.3, n).matrix()) < 1e-12);
        }
    }

    #[test]
    fn biased_pauli_probabilities() {
        let kind = ChannelKind::BiasedPauli { p: 0.01, b: 0.5, qubits: 1 };
        let twirl = pauli_twirl(&make_channel(&kind).unwrap()).unwrap();
        assert!(approx(twirl.get("X").unwrap(), 0.01, 1e-12));
        assert!(approx(twirl.get("Y").unwrap(), 0.01, 1e-12));
        assert!(approx(twirl.get("Z").unwrap(), 0.015, 1e-12));
        assert!(approx(twirl.get("I").unwrap(), 0.965, 1e-12));
    }

    #[test]
    fn biased_pauli_rejects_out_of_range() {
        assert!(make_channel(&ChannelKind::BiasedPauli { p: 0.3, b: 1.0, qubits: 1 }).is_err());
        assert!(make_channel(&ChannelKind::Depolarizing { p: 1.5, qubits: 1 }).is_err());
        assert!(make_channel(&ChannelKind::AmplitudeDamping { gamma: -0.1, qubits: 1 }).is_err());
    }

    #[test]
    fn amplitude_damping_kraus_entry() {
        let [_, k1] = amplitude_damping_kraus(0.01);
        assert!(approx(k1[(0, 1)].re, 0.1, 1e-15));
    }

    #[test]
    fn coherent_channel_is_rank_one_unitary() {
        let choi = make_channel(&ChannelKind::CoherentCnot { delta_theta: std::f64::consts::PI / 32.0 }).unwrap();
        assert!(choi.is_cptp());
        let eig = crate::qmat::eig_hermitian(choi.matrix()).unwrap();
        assert_eq!(eig.values.iter().filter(|&&x| x > 1e-10).count(), 1);
        // dtheta = 1 recovers the CNOT itself.
        let k = channel_kraus(&ChannelKind::CoherentCnot { delta_theta: 1.0 }).unwrap();
        assert!(max_abs_diff(&k[0], &gates::cnot()) < 1e-12);
    }

    #[test]
    fn every_family_is_cptp() {
        let kinds = [
            ChannelKind::Depolarizing { p: 0.02, qubits: 2 },
            ChannelKind::BiasedPauli { p: 0.02, b: 0.5, qubits: 2 },
            ChannelKind::AmplitudeDamping { gamma: 0.01, qubits: 2 },
            ChannelKind::CoherentCnot { delta_theta: std::f64::consts::PI / 64.0 },
        ];
        for k in &kinds {
            assert!(make_channel(k).unwrap().is_cptp(), "{}", k.label());
        }
    }

    #[test]
    fn pta_of_amplitude_damping() {
        let choi = make_channel(&ChannelKind::AmplitudeDamping { gamma: 0.01, qubits: 1 }).unwrap();
        let t = pauli_twirl(&choi).unwrap();
        assert!(approx(t.get("X").unwrap(), 0.0025, 1e-15));
        assert!(approx(t.get("Y").unwrap(), 0.0025, 1e-15));
        let pz = (1.0 - 0.99f64.sqrt()).powi(2) / 4.0;
        assert!(approx(t.get("Z").unwrap(), pz, 1e-15));
        assert!(format!("{:.0e}", t.get("Z").unwrap()) == "6e-6");
    }

    #[test]
    fn pta_identity_and_depolarizing() {
        let t = pauli_twirl(&ChoiTensor::identity(2)).unwrap();
        assert!(t.probs()[1..].iter().all(|&p| p.abs() < 1e-15));
        let p = 0.08;
        let depol = make_channel(&ChannelKind::Depolarizing { p, qubits: 1 }).unwrap();
        let t = pauli_twirl(&depol).unwrap();
        for l in ["X", "Y", "Z"] {
            assert!(approx(t.get(l).unwrap(), p / 4.0, 1e-14));
        }
    }

    #[test]
    fn pta_preserves_ptm_diagonal() {
        let choi = make_channel(&ChannelKind::AmplitudeDamping { gamma: 0.05, qubits: 2 }).unwrap();
        let twirled = pauli_twirl(&choi).unwrap().to_choi();
        let a = ptm_diagonal(&choi).unwrap();
        let b = ptm_diagonal(&twirled).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-10));
    }

    #[test]
    fn cta_fixed_points() {
        assert!(clifford_twirl(&ChoiTensor::identity(2)).abs() < 1e-14);
        for n in 1..=2 {
            let choi = make_channel(&ChannelKind::Depolarizing { p: 0.037, qubits: n }).unwrap();
            assert!(approx(clifford_twirl(&choi), 0.037, 1e-13));
        }
    }

    #[test]
    fn cta_matches_state_averaged_fidelity() {
        // The six single-qubit stabilizer states form a 2-design, so their mean
        // state fidelity equals the Haar average exactly.
        let gamma = 0.01;
        let kraus = amplitude_damping_kraus(gamma);
        let states: Vec<CMatrix> = (0..6)
            .map(|k| {
                let (axis, sign) = (k / 2 + 1, if k % 2 == 0 { 1.0 } else { -1.0 });
                (CMatrix::identity(2, 2) + pauli(axis).scale(sign)).scale(0.5)
            })
            .collect();
        let favg: f64 = states
            .iter()
            .map(|rho| crate::qmat::inner(rho, &apply_kraus(&kraus, rho)).re)
            .sum::<f64>()
            / 6.0;
        let choi = make_channel(&ChannelKind::AmplitudeDamping { gamma, qubits: 1 }).unwrap();
        assert!(approx(average_gate_fidelity(&choi), favg, 1e-12));
        let p = clifford_twirl(&choi);
        let depol = make_channel(&ChannelKind::Depolarizing { p, qubits: 1 }).unwrap();
        assert!(approx(average_gate_fidelity(&depol), favg, 1e-12));
    }

    #[test]
    fn assignment_matrices() {
        let a = make_assignment(0.05).unwrap();
        assert_eq!(a.0, [[0.95, 0.05], [0.05, 0.95]]);
        assert!(make_assignment(0.0).unwrap().is_identity());
        assert_eq!(make_assignment(0.01).unwrap().0, [[0.99, 0.01], [0.01, 0.99]]);
        assert!(make_assignment(0.6).is_err());
        assert!(make_assignment(-0.1).is_err());
        assert!(matches!(
            make_assignment(0.5).unwrap().inverse(),
            Err(Error::SingularAssignment { .. })
        ));
    }

    #[test]
    fn config_round_trip_and_build() {
        let json = r#"{"two_qubit":{"kind":"depolarizing","p":0.01},
                       "one_qubit":{"kind":"depolarizing","p":0.0001,"qubits":1},
                       "p_meas":0.05}"#;
        let cfg: NoiseConfig = serde_json::from_str(json).unwrap();
        let spec = cfg.build().unwrap();
        assert_eq!(spec.two_qubit.as_ref().unwrap().num_qubits(), 2);
        assert_eq!(spec.one_qubit.as_ref().unwrap().num_qubits(), 1);
        assert_eq!(spec.readout.unwrap().0[0][1], 0.05);
        let again: NoiseConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
        let wrong = NoiseConfig {
            two_qubit: Some(ChannelKind::Depolarizing { p: 0.01, qubits: 1 }),
            ..Default::default()
        };
        assert!(wrong.build().is_err());
    }

    #[test]
    fn superoperator_acts_like_kraus() {
        let ch = NoiseChannel::new(make_channel(&ChannelKind::AmplitudeDamping { gamma: 0.2, qubits: 1 }).unwrap()).unwrap();
        let s = ch.superoperator();
        let rho = CMatrix::from_row_slice(2, 2, &[c(0.6, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.4, 0.0)]);
        let v = crate::qmat::vectorize(&rho);
        let out = crate::qmat::devectorize(&(s * v), 2, 2).unwrap();
        assert!(max_abs_diff(&out, &apply_kraus(&ch.kraus, &rho)) < 1e-14);
    }
}
