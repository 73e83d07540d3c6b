//! Preparation and measurement bases for conditional process tomography.

use nalgebra::DMatrix;

use crate::cut::{basis_rotation, decode_setting, preparation_state};
use crate::error::{Error, Result};
use crate::noise::AssignmentMatrix;
use crate::qmat::{eig_hermitian_unchecked, kron_all, CMatrix, ZERO};

/// Single-qubit measurement element for basis `b` (0 = X, 1 = Y, 2 = Z) and
/// outcome `o` (0 = +1 eigenstate).
pub fn measurement_element(basis: usize, outcome: usize) -> CMatrix {
    let r = basis_rotation(basis);
    let mut proj = CMatrix::zeros(2, 2);
    proj[(outcome, outcome)] = crate::qmat::ONE;
    r.adjoint() * proj * r
}

/// Measurement element with classical readout confusion folded in:
/// `sum_t A[o][t] M_{b,t}`.
pub fn noisy_measurement_element(basis: usize, outcome: usize, a: &AssignmentMatrix) -> CMatrix {
    measurement_element(basis, 0).scale(a.get(outcome, 0))
        + measurement_element(basis, 1).scale(a.get(outcome, 1))
}

/// Tensor-product tomography basis for a fragment with `k_in` prepared and
/// `k_out` measured cut wires.
#[derive(Debug, Clone)]
pub struct TomoBasis {
    k_in: usize,
    k_out: usize,
    readout: Option<AssignmentMatrix>,
}

impl TomoBasis {
    pub fn new(k_in: usize, k_out: usize) -> Self {
        Self {
            k_in,
            k_out,
            readout: None,
        }
    }

    /// Variant whose measurement elements are pre-mixed by `a` on every
    /// measured cut wire.
    pub fn noisy(k_in: usize, k_out: usize, a: AssignmentMatrix) -> Self {
        Self {
            k_in,
            k_out,
            readout: Some(a),
        }
    }

    pub fn k_in(&self) -> usize {
        self.k_in
    }

    pub fn k_out(&self) -> usize {
        self.k_out
    }

    pub fn num_settings(&self) -> usize {
        4usize.pow(self.k_in as u32) * 3usize.pow(self.k_out as u32)
    }

    pub fn outcomes_per_setting(&self) -> usize {
        1 << self.k_out
    }

    pub fn num_elements(&self) -> usize {
        self.num_settings() * self.outcomes_per_setting()
    }

    /// Dimension of the Choi matrices this basis probes.
    pub fn dim(&self) -> usize {
        1 << (self.k_in + self.k_out)
    }

    pub fn preparation(&self, preps: &[usize]) -> CMatrix {
        kron_all(preps.iter().map(|&i| preparation_state(i)))
    }

    pub fn measurement(&self, bases: &[usize], outcome: usize) -> CMatrix {
        let k = bases.len();
        kron_all(bases.iter().enumerate().map(|(j, &b)| {
            let o = (outcome >> (k - 1 - j)) & 1;
            match &self.readout {
                Some(a) => noisy_measurement_element(b, o, a),
                None => measurement_element(b, o),
            }
        }))
    }

    /// `B = rho_i^T kron M_{b,o}` for a setting index and cut outcome.
    pub fn element(&self, setting: usize, outcome: usize) -> CMatrix {
        let (preps, bases) = decode_setting(setting, self.k_in, self.k_out);
        self.preparation(&preps)
            .transpose()
            .kronecker(&self.measurement(&bases, outcome))
    }

    /// All elements, indexed `setting * 2^k_out + outcome`.
    pub fn elements(&self) -> Vec<CMatrix> {
        (0..self.num_settings())
            .flat_map(|s| (0..self.outcomes_per_setting()).map(move |o| (s, o)))
            .map(|(s, o)| self.element(s, o))
            .collect()
    }
}

/// Largest tolerated frame condition number.
pub const MAX_FRAME_CONDITION: f64 = 1e12;

fn frame_operator(elements: &[CMatrix]) -> Result<CMatrix> {
    let first = elements
        .first()
        .ok_or_else(|| Error::IncompleteBasis { rank: 0, dim: 0 })?;
    let n = first.len();
    let mut frame = CMatrix::zeros(n, n);
    for b in elements {
        let v = crate::qmat::vectorize(b);
        frame += &v * v.adjoint();
    }
    Ok(frame)
}

/// Numerical rank and condition number of a PSD frame spectrum.
fn frame_rank(values: &[f64]) -> (usize, f64) {
    let top = values.iter().copied().fold(0.0, f64::max);
    let rank = values.iter().filter(|&&v| v > top * 1e-12).count();
    let bottom = values.iter().copied().fold(f64::INFINITY, f64::min);
    let cond = if bottom <= 0.0 { f64::INFINITY } else { top / bottom };
    (rank, cond)
}

/// Canonical duals `|D_j>> = F^{-1} |B_j>>` with `F = sum |B_i>><<B_i|`.
pub fn dual_basis(elements: &[CMatrix]) -> Result<Vec<CMatrix>> {
    let frame = frame_operator(elements)?;
    let eig = eig_hermitian_unchecked(&crate::qmat::hermitian_part(&frame));
    let (rank, cond) = frame_rank(&eig.values);
    if cond >= MAX_FRAME_CONDITION {
        return Err(Error::IncompleteBasis {
            rank,
            dim: frame.nrows(),
        });
    }
    let inv = eig.map(|v| 1.0 / v);
    Ok(apply_to_elements(&inv, elements))
}

/// Duals built from the Moore-Penrose pseudo-inverse of the frame; defined
/// for incomplete sets and equal to `dual_basis` on complete ones.
pub fn dual_basis_pinv(elements: &[CMatrix]) -> Result<Vec<CMatrix>> {
    let frame = frame_operator(elements)?;
    let eig = eig_hermitian_unchecked(&crate::qmat::hermitian_part(&frame));
    let top = eig.max();
    let inv = eig.map(|v| if v > top * 1e-12 { 1.0 / v } else { 0.0 });
    Ok(apply_to_elements(&inv, elements))
}

fn apply_to_elements(inv: &CMatrix, elements: &[CMatrix]) -> Vec<CMatrix> {
    let (r, c) = elements[0].shape();
    elements
        .iter()
        .map(|b| {
            let v = inv * crate::qmat::vectorize(b);
            CMatrix::from_column_slice(r, c, v.as_slice())
        })
        .collect()
}

/// Real coordinates of a Hermitian matrix in which `Tr[A B]` is the dot
/// product: the diagonal, then `sqrt(2) Re` and `sqrt(2) Im` of each upper
/// entry in row order.
pub(crate) fn herm_to_real(h: &CMatrix) -> Vec<f64> {
    let d = h.nrows();
    let mut x = Vec::with_capacity(d * d);
    x.extend((0..d).map(|i| h[(i, i)].re));
    let s = std::f64::consts::SQRT_2;
    for i in 0..d {
        for j in i + 1..d {
            x.push(s * h[(i, j)].re);
            x.push(s * h[(i, j)].im);
        }
    }
    x
}

pub(crate) fn real_to_herm(x: &[f64], d: usize) -> CMatrix {
    let mut h = CMatrix::from_element(d, d, ZERO);
    for i in 0..d {
        h[(i, i)].re = x[i];
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut k = d;
    for i in 0..d {
        for j in i + 1..d {
            let z = crate::qmat::c(s * x[k], s * x[k + 1]);
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
            k += 2;
        }
    }
    h
}

/// Design matrix with one row of real coordinates per listed element.
pub(crate) fn design_matrix(basis: &TomoBasis, rows: &[(usize, usize)]) -> DMatrix<f64> {
    let n = basis.dim() * basis.dim();
    let mut s = DMatrix::zeros(rows.len(), n);
    for (r, &(setting, o)) in rows.iter().enumerate() {
        let x = herm_to_real(&basis.element(setting, o));
        for (c, v) in x.into_iter().enumerate() {
            s[(r, c)] = v;
        }
    }
    s
}
