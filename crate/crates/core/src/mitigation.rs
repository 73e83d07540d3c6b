//! Dominant eigenvalue truncation and the related closed-form diagnostics.

use crate::error::{Error, Result};
use crate::qmat::{
    devectorize, dominant_eigenvector, eig_hermitian, CMatrix, CVector, ChoiTensor, PSD_TOL,
};

/// Eigenvalues closer than this count as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct DevtReport {
    pub input: ChoiTensor,
    pub truncated: ChoiTensor,
    pub dominant_eigenvalue: f64,
    /// `1 - lambda_0 / Tr`.
    pub discarded_weight: f64,
    /// Frobenius distance of `K0^dag K0` from `(Tr[K0^dag K0]/d) I`.
    pub tp_deviation: f64,
}

struct Dominant {
    value: f64,
    vector: CVector,
    tp_deviation: f64,
}

fn dominant(t: &ChoiTensor) -> Result<Dominant> {
    let eig = eig_hermitian(t.matrix())?;
    if eig.min() < -PSD_TOL {
        return Err(Error::NotPositive {
            min_eigenvalue: eig.min(),
        });
    }
    let (value, vector) = dominant_eigenvector(&eig, DEGENERACY_GAP);
    let k0 = devectorize(&vector.scale(value.max(0.0).sqrt()), t.dim_out(), t.dim_in())?;
    let gram = k0.adjoint() * &k0;
    let d = t.dim_in();
    let scale = crate::qmat::trace(&gram).re / d as f64;
    let tp_deviation = (gram - CMatrix::identity(d, d).scale(scale)).norm();
    Ok(Dominant {
        value,
        vector,
        tp_deviation,
    })
}

/// Replaces a tensor by its dominant eigenprojector scaled to trace `2^k_in`.
pub fn devt(t: &ChoiTensor) -> Result<DevtReport> {
    let dom = dominant(t)?;
    let d_in = t.dim_in() as f64;
    let truncated = ChoiTensor::new(
        t.num_in(),
        t.num_out(),
        (&dom.vector * dom.vector.adjoint()).scale(d_in),
    )?;
    let tr = t.trace();
    Ok(DevtReport {
        input: t.clone(),
        truncated,
        dominant_eigenvalue: dom.value,
        discarded_weight: if tr > 0.0 { 1.0 - dom.value / tr } else { 1.0 },
        tp_deviation: dom.tp_deviation,
    })
}

/// Truncates every conditional block to `lambda_0(s) |v0(s)><v0(s)|`, with
/// one common factor so that the blocks' traces sum to `2^k_in`. For a
/// single block this is `devt`.
pub fn devt_conditional(tensors: &[ChoiTensor]) -> Result<Vec<DevtReport>> {
    let doms = tensors.iter().map(dominant).collect::<Result<Vec<_>>>()?;
    let total: f64 = doms.iter().map(|d| d.value.max(0.0)).sum();
    if total <= 0.0 {
        return Err(Error::NonPositiveMass { mass: total });
    }
    tensors
        .iter()
        .zip(doms)
        .map(|(t, dom)| {
            let weight = t.dim_in() as f64 * dom.value.max(0.0) / total;
            let truncated = ChoiTensor::new(
                t.num_in(),
                t.num_out(),
                (&dom.vector * dom.vector.adjoint()).scale(weight),
            )?;
            let tr = t.trace();
            Ok(DevtReport {
                input: t.clone(),
                truncated,
                dominant_eigenvalue: dom.value,
                discarded_weight: if tr > 0.0 { 1.0 - dom.value / tr } else { 1.0 },
                tp_deviation: dom.tp_deviation,
            })
        })
        .collect()
}

/// `1 - |<psi_1|psi>|^2` where `psi_1` is the dominant eigenvector of
/// `rho_noisy`.
pub fn coherent_mismatch(rho_noisy: &CMatrix, psi: &CVector) -> Result<f64> {
    if psi.len() != rho_noisy.nrows() {
        return Err(Error::Dimension("state and density matrix sizes differ".into()));
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Parameter(format!("state norm {norm} is not 1")));
    }
    let eig = eig_hermitian(rho_noisy)?;
    let (_, psi1) = dominant_eigenvector(&eig, DEGENERACY_GAP);
    Ok(1.0 - psi1.dotc(psi).norm_sqr())
}

/// `delta^2 / 4` with `delta = (1 - p)^(-n m) - 1`.
pub fn depol_mismatch_bound(n: usize, m: usize, p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Parameter(format!("layer error {p} not in [0, 1)")));
    }
    if n == 0 || m == 0 {
        return Err(Error::Parameter("qubit and layer counts must be positive".into()));
    }
    let delta = (1.0 - p).powf(-((n * m) as f64)) - 1.0;
    Ok(delta * delta / 4.0)
}

/// Magnitude of the eigenvalues `+-lambda` of `rho - E(rho)` for the biased
/// Pauli channel and the pure state `alpha|0> + beta|1>`:
/// `2p sqrt(1 + (4b + b^2)|alpha|^2|beta|^2)`.
pub fn biased_dominant_eigenvalue(
    p: f64,
    b: f64,
    alpha: num_complex::Complex64,
    beta: num_complex::Complex64,
) -> Result<f64> {
    let (a2, b2) = (alpha.norm_sqr(), beta.norm_sqr());
    if (a2 + b2 - 1.0).abs() > 1e-12 {
        return Err(Error::Parameter(format!("|alpha|^2 + |beta|^2 = {}", a2 + b2)));
    }
    if p < 0.0 || (3.0 + b) * p > 1.0 || (1.0 + b) * p < 0.0 {
        return Err(Error::Parameter(format!("biased Pauli p={p}, b={b} invalid")));
    }
    let x = a2 * b2;
    Ok(2.0 * p * (1.0 + (4.0 * b + b * b) * x).max(0.0).sqrt())
}

/// `-b / 4` for a negative bias.
pub fn pta_bias_threshold(b: f64) -> Result<f64> {
    if b.is_nan() || b >= 0.0 {
        return Err(Error::Parameter(format!("bias {b} must be negative")));
    }
    Ok(-b / 4.0)
}
