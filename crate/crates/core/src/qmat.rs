//! Dense complex linear algebra and the channel representation conventions
//! used everywhere else in the crate.
//!
//! Conventions, fixed globally:
//!
//! * Qubit 0 is the most significant bit of a basis index (big-endian), and
//!   multi-qubit operators are built with `kron(q0, kron(q1, ...))`.
//! * Vectorization stacks columns: `|A>> = vec(A)`, so that
//!   `<<A|B>> = Tr[A^dag B]` and `vec(A X B) = (B^T kron A) vec(X)`.
//! * Choi matrices are unnormalized with the input system first:
//!   `L = sum_ij |i><j| kron E(|i><j|)`. Then `E(rho) = Tr_in[(rho^T kron I) L]`,
//!   `L = sum_k |K_k>><<K_k|`, and a trace-preserving channel on `n` input
//!   qubits has `Tr[L] = 2^n`.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Elementwise tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Smallest eigenvalue still accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-8;
/// Tolerance for unitarity checks.
pub const UNITARY_TOL: f64 = 1e-10;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Builds a matrix from real row-major entries.
pub fn real_matrix(rows: usize, cols: usize, entries: &[f64]) -> CMatrix {
    CMatrix::from_row_iterator(rows, cols, entries.iter().map(|&x| c(x, 0.0)))
}

/// Single-qubit Pauli matrix by index: 0 = I, 1 = X, 2 = Y, 3 = Z.
pub fn pauli(index: usize) -> CMatrix {
    match index {
        0 => CMatrix::identity(2, 2),
        1 => real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        2 => CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        3 => real_matrix(2, 2, &[1.0, 0.0, 0.0, -1.0]),
        _ => panic!("pauli index {index} out of range"),
    }
}

/// Multi-qubit Pauli operator for base-4 digits (qubit 0 first).
pub fn pauli_string(digits: &[usize]) -> CMatrix {
    kron_all(digits.iter().map(|&d| pauli(d)))
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Kronecker product of a sequence; the empty product is the 1x1 identity.
pub fn kron_all<I: IntoIterator<Item = CMatrix>>(factors: I) -> CMatrix {
    factors
        .into_iter()
        .fold(CMatrix::identity(1, 1), |acc, f| acc.kronecker(&f))
}

pub fn dagger(a: &CMatrix) -> CMatrix {
    a.adjoint()
}

/// Largest elementwise deviation `|A - A^dag|`.
pub fn max_asymmetry(a: &CMatrix) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// `(A + A^dag) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

pub fn trace(a: &CMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

/// `Tr[A^dag B]`.
pub fn inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Largest elementwise modulus of `A - B`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Column-stacking vectorization.
pub fn vectorize(a: &CMatrix) -> CVector {
    // nalgebra stores matrices column-major, which is exactly column stacking.
    CVector::from_column_slice(a.as_slice())
}

pub fn devectorize(v: &CVector, rows: usize, cols: usize) -> Result<CMatrix> {
    if v.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "vector of length {} cannot form a {rows}x{cols} matrix",
            v.len()
        )));
    }
    Ok(CMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Spectrum of a Hermitian matrix with eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn max(&self) -> f64 {
        *self.values.last().expect("empty spectrum")
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    /// Rebuilds `V f(diag) V^dag` for a real function of the eigenvalues.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let s = f(lam);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        hermitian_part(&(scaled * self.vectors.adjoint()))
    }
}

/// Eigendecomposition of a Hermitian matrix.
pub fn eig_hermitian(m: &CMatrix) -> Result<HermitianEigen> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let asym = max_asymmetry(m);
    if asym > HERMITIAN_TOL || !is_finite(m) {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    Ok(eig_hermitian_unchecked(&hermitian_part(m)))
}

/// Eigendecomposition without validation; callers guarantee hermiticity.
pub(crate) fn eig_hermitian_unchecked(m: &CMatrix) -> HermitianEigen {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    HermitianEigen { values, vectors }
}

/// Largest elementwise deviation of `U^dag U` from the identity.
pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let n = u.nrows();
    max_abs_diff(&(u.adjoint() * u), &CMatrix::identity(n, n))
}

/// Principal logarithm of a unitary: Hermitian `H` with `exp(iH) = U` and
/// every eigenphase in `(-pi, pi]`.
pub fn matrix_log_unitary(u: &CMatrix) -> Result<CMatrix> {
    let deviation = unitarity_deviation(u);
    if deviation > UNITARY_TOL {
        return Err(Error::NotUnitary { deviation });
    }
    let n = u.nrows();
    // A unitary is normal, so its Schur form is diagonal up to roundoff.
    let (q, t) = Schur::new(u.clone()).unpack();
    let mut phases = CMatrix::zeros(n, n);
    for k in 0..n {
        let mut theta = t[(k, k)].arg();
        if theta <= -std::f64::consts::PI + 1e-9 {
            theta += 2.0 * std::f64::consts::PI;
        }
        phases[(k, k)] = c(theta, 0.0);
    }
    Ok(hermitian_part(&(&q * phases * q.adjoint())))
}

/// `exp(i t H)` for Hermitian `H`.
pub fn exp_i_hermitian(h: &CMatrix, t: f64) -> Result<CMatrix> {
    let eig = eig_hermitian(h)?;
    let n = h.nrows();
    let mut scaled = eig.vectors.clone();
    for (j, &lam) in eig.values.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, t * lam);
        for i in 0..n {
            scaled[(i, j)] *= phase;
        }
    }
    Ok(scaled * eig.vectors.adjoint())
}

/// `Tr_A` of an operator on `A kron B`.
pub fn partial_trace_first(m: &CMatrix, dim_a: usize, dim_b: usize) -> CMatrix {
    let mut out = CMatrix::zeros(dim_b, dim_b);
    for a in 0..dim_a {
        for i in 0..dim_b {
            for j in 0..dim_b {
                out[(i, j)] += m[(a * dim_b + i, a * dim_b + j)];
            }
        }
    }
    out
}

/// `Tr_B` of an operator on `A kron B`.
pub fn partial_trace_second(m: &CMatrix, dim_a: usize, dim_b: usize) -> CMatrix {
    let mut out = CMatrix::zeros(dim_a, dim_a);
    for i in 0..dim_a {
        for j in 0..dim_a {
            let mut acc = ZERO;
            for b in 0..dim_b {
                acc += m[(i * dim_b + b, j * dim_b + b)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Trace distance `1/2 ||A - B||_1` of two Hermitian matrices.
pub fn trace_distance_hermitian(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = hermitian_part(&(a - b));
    0.5 * eig_hermitian_unchecked(&diff)
        .values
        .iter()
        .map(|x| x.abs())
        .sum::<f64>()
}

/// What a fragment tensor represents, fixed by which cut wires are open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChoiKind {
    /// No input wires: an (unnormalized) density matrix.
    State,
    /// Input and output wires.
    Channel,
    /// No output wires: the transpose of a POVM element.
    PovmElement,
}

impl ChoiKind {
    pub fn classify(num_in: usize, num_out: usize) -> Self {
        match (num_in, num_out) {
            (0, _) => ChoiKind::State,
            (_, 0) => ChoiKind::PovmElement,
            _ => ChoiKind::Channel,
        }
    }
}

/// Unnormalized Choi matrix on `num_in + num_out` qubits, input first.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiTensor {
    num_in: usize,
    num_out: usize,
    matrix: CMatrix,
}

impl ChoiTensor {
    /// Validates dimensions and hermiticity; stores the exact Hermitian part.
    pub fn new(num_in: usize, num_out: usize, matrix: CMatrix) -> Result<Self> {
        let dim = 1usize << (num_in + num_out);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::Dimension(format!(
                "Choi on {num_in}+{num_out} qubits needs {dim}x{dim}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let asymmetry = max_asymmetry(&matrix);
        if asymmetry > HERMITIAN_TOL || !is_finite(&matrix) {
            return Err(Error::NotHermitian { asymmetry });
        }
        Ok(Self {
            num_in,
            num_out,
            matrix: hermitian_part(&matrix),
        })
    }

    pub(crate) fn from_hermitian_unchecked(num_in: usize, num_out: usize, matrix: CMatrix) -> Self {
        Self {
            num_in,
            num_out,
            matrix,
        }
    }

    /// Choi of the identity channel on `n` qubits.
    pub fn identity(n: usize) -> Self {
        Self::from_kraus(&[CMatrix::identity(1 << n, 1 << n)])
            .expect("identity Kraus is valid")
    }

    /// Choi of the unitary channel `rho -> U rho U^dag`.
    pub fn unitary(u: &CMatrix) -> Result<Self> {
        let deviation = unitarity_deviation(u);
        if deviation > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Self::from_kraus(std::slice::from_ref(u))
    }

    /// `L = sum_k |K_k>><<K_k|` for Kraus operators of shape `d_out x d_in`.
    pub fn from_kraus(kraus: &[CMatrix]) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::Parameter("empty Kraus set".into()))?;
        let (d_out, d_in) = first.shape();
        let num_in = qubit_count(d_in)?;
        let num_out = qubit_count(d_out)?;
        let mut gram = CMatrix::zeros(d_in, d_in);
        let mut choi = CMatrix::zeros(d_in * d_out, d_in * d_out);
        for k in kraus {
            if k.shape() != (d_out, d_in) {
                return Err(Error::Dimension("Kraus operators differ in shape".into()));
            }
            gram += k.adjoint() * k;
            let v = vectorize(k);
            choi += &v * v.adjoint();
        }
        // Allow trace-decreasing sets, but not ones that increase trace.
        let excess = eig_hermitian_unchecked(&hermitian_part(&gram)).max() - 1.0;
        if excess > PSD_TOL {
            return Err(Error::Parameter(format!(
                "Kraus set is trace increasing (sum K^dag K exceeds I by {excess:.3e})"
            )));
        }
        Ok(Self::from_hermitian_unchecked(
            num_in,
            num_out,
            hermitian_part(&choi),
        ))
    }

    /// Canonical Kraus decomposition, ordered so that `<<K_i|K_i>>` is
    /// non-increasing.
    pub fn to_kraus(&self) -> Result<Vec<CMatrix>> {
        let eig = eig_hermitian_unchecked(&self.matrix);
        if eig.min() < -PSD_TOL {
            return Err(Error::NotPositive {
                min_eigenvalue: eig.min(),
            });
        }
        let cutoff = 1e-14 * eig.max().max(1.0);
        let (d_in, d_out) = (self.dim_in(), self.dim_out());
        let mut out = Vec::new();
        for j in (0..eig.values.len()).rev() {
            let lam = eig.values[j];
            if lam <= cutoff {
                break;
            }
            let v: CVector = eig.vectors.column(j).scale(lam.sqrt());
            out.push(devectorize(&v, d_out, d_in)?);
        }
        if out.is_empty() {
            out.push(CMatrix::zeros(d_out, d_in));
        }
        Ok(out)
    }

    pub fn num_in(&self) -> usize {
        self.num_in
    }

    pub fn num_out(&self) -> usize {
        self.num_out
    }

    pub fn dim_in(&self) -> usize {
        1 << self.num_in
    }

    pub fn dim_out(&self) -> usize {
        1 << self.num_out
    }

    pub fn kind(&self) -> ChoiKind {
        ChoiKind::classify(self.num_in, self.num_out)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        trace(&self.matrix).re
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_hermitian_unchecked(self.num_in, self.num_out, self.matrix.scale(factor))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eig_hermitian_unchecked(&self.matrix).min()
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= -PSD_TOL
    }

    /// `Tr_out[L]`, an operator on the input space.
    pub fn partial_trace_out(&self) -> CMatrix {
        partial_trace_second(&self.matrix, self.dim_in(), self.dim_out())
    }

    /// Largest elementwise deviation of `Tr_out[L]` from the identity.
    pub fn tp_deviation(&self) -> f64 {
        let d = self.dim_in();
        max_abs_diff(&self.partial_trace_out(), &CMatrix::identity(d, d))
    }

    pub fn is_cptp(&self) -> bool {
        self.is_psd() && self.tp_deviation() <= PSD_TOL
    }

    /// `E(rho) = Tr_in[(rho^T kron I) L]`.
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        let (d_in, d_out) = (self.dim_in(), self.dim_out());
        if rho.shape() != (d_in, d_in) {
            return Err(Error::Dimension(format!(
                "channel input is {d_in}x{d_in}, got {}x{}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        let mut out = CMatrix::zeros(d_out, d_out);
        for r in 0..d_in {
            for col in 0..d_in {
                let w = rho[(r, col)];
                if w == ZERO {
                    continue;
                }
                for a in 0..d_out {
                    for b in 0..d_out {
                        out[(a, b)] += w * self.matrix[(r * d_out + a, col * d_out + b)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Trace distance between the Choi matrices.
    pub fn distance(&self, other: &ChoiTensor) -> f64 {
        trace_distance_hermitian(&self.matrix, &other.matrix)
    }
}

/// Applies a Kraus set directly: `sum_k K rho K^dag`.
pub fn apply_kraus(kraus: &[CMatrix], rho: &CMatrix) -> CMatrix {
    kraus
        .iter()
        .fold(CMatrix::zeros(kraus[0].nrows(), kraus[0].nrows()), |acc, k| {
            acc + k * rho * k.adjoint()
        })
}

/// Number of qubits for a power-of-two dimension.
pub fn qubit_count(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::Dimension(format!("{dim} is not a power of two")));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Dominant eigenvector with a deterministic choice inside a degenerate top
/// eigenspace: each candidate is phase-fixed so its first non-negligible
/// component is positive real, and the lexicographically largest wins.
pub fn dominant_eigenvector(eig: &HermitianEigen, degeneracy_gap: f64) -> (f64, CVector) {
    let top = eig.max();
    let n = eig.values.len();
    let mut best: Option<CVector> = None;
    for j in (0..n).rev() {
        if top - eig.values[j] >= degeneracy_gap {
            break;
        }
        let v = phase_normalize(eig.vectors.column(j).into_owned());
        best = Some(match best {
            None => v,
            Some(b) => {
                if lexicographic_greater(&v, &b) {
                    v
                } else {
                    b
                }
            }
        });
    }
    (top, best.expect("non-empty spectrum"))
}

fn phase_normalize(mut v: CVector) -> CVector {
    if let Some(first) = v.iter().find(|z| z.norm() > 1e-12) {
        let phase = first.conj() / first.norm();
        v *= phase;
    }
    v
}

fn lexicographic_greater(a: &CVector, b: &CVector) -> bool {
    const EPS: f64 = 1e-12;
    for (x, y) in a.iter().zip(b.iter()) {
        if (x.re - y.re).abs() > EPS {
            return x.re > y.re;
        }
        if (x.im - y.im).abs() > EPS {
            return x.im > y.im;
        }
    }
    false
}

/// Unnormalized maximally entangled vector `sum_i |i>|i>` on `n + n` qubits.
pub fn omega(n: usize) -> CVector {
    let d = 1 << n;
    let mut v = CVector::zeros(d * d);
    for i in 0..d {
        v[i * d + i] = ONE;
    }
    v
}
