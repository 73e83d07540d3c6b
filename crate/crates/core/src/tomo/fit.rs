//! LIN, CLS and MEMCLS fitters.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::basis::{design_matrix, herm_to_real, real_to_herm, TomoBasis, MAX_FRAME_CONDITION};
use super::dataset::{ConditionalDataset, Shots};
use crate::error::{Error, Result};
use crate::noise::AssignmentMatrix;
use crate::qmat::{eig_hermitian_unchecked, partial_trace_second, CMatrix, ChoiTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Fitter {
    #[serde(rename = "LIN")]
    Lin,
    #[serde(rename = "CLS")]
    Cls,
    #[serde(rename = "MEMCLS")]
    Memcls,
}

impl Fitter {
    pub fn name(&self) -> &'static str {
        match self {
            Fitter::Lin => "LIN",
            Fitter::Cls => "CLS",
            Fitter::Memcls => "MEMCLS",
        }
    }
}

impl std::fmt::Display for Fitter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Fitter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LIN" => Ok(Fitter::Lin),
            "CLS" => Ok(Fitter::Cls),
            "MEMCLS" => Ok(Fitter::Memcls),
            _ => Err(Error::Parse(format!("unknown fitter {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitDiagnostics {
    pub iterations: usize,
    /// Final objective value (half weighted squared residual).
    pub residual: f64,
    /// Smallest eigenvalue over blocks before any positivity repair.
    pub min_eigenvalue_before: f64,
    pub converged: bool,
    /// Set when LIN ran on an incomplete frame.
    pub low_confidence: bool,
}

/// Fitted conditional tensors, indexed by conditioning outcome `s`.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub fitter: Fitter,
    pub tensors: Vec<ChoiTensor>,
    pub diagnostics: FitDiagnostics,
}

/// Affine constraint imposed alongside positivity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AffineConstraint {
    /// Positivity only.
    None,
    /// `sum_s Tr_out T(s) = I_in`.
    #[default]
    TpSum,
}

/// Per-probability least-squares weights.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    #[default]
    Uniform,
    /// `w = 1 / max(sigma_hat, 1/shots)` with the binomial standard error.
    Binomial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClsOptions {
    pub constraint: AffineConstraint,
    pub weighting: Weighting,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub dykstra_max_iterations: usize,
    pub dykstra_tolerance: f64,
}

impl Default for ClsOptions {
    fn default() -> Self {
        Self {
            constraint: AffineConstraint::TpSum,
            weighting: Weighting::Uniform,
            max_iterations: 5000,
            tolerance: 1e-9,
            dykstra_max_iterations: 500,
            dykstra_tolerance: 1e-10,
        }
    }
}

fn included_rows(data: &ConditionalDataset) -> Vec<(usize, usize)> {
    data.included_settings()
        .into_iter()
        .flat_map(|setting| (0..data.num_cut_outcomes()).map(move |o| (setting, o)))
        .collect()
}

fn basis_for(data: &ConditionalDataset, readout: Option<&AssignmentMatrix>) -> TomoBasis {
    match readout {
        Some(a) => TomoBasis::noisy(data.k_in, data.k_out, *a),
        None => TomoBasis::new(data.k_in, data.k_out),
    }
}

/// Observed frequencies, one column per conditioning outcome.
fn frequency_matrix(data: &ConditionalDataset, rows: &[(usize, usize)]) -> DMatrix<f64> {
    let ms = data.num_conditioning_outcomes();
    DMatrix::from_fn(rows.len(), ms, |r, s| {
        let (setting, o) = rows[r];
        data.frequency(setting, o, s)
    })
}

/// Linear inversion in real coordinates: returns `(coefficients, frame
/// complete)` where coefficients are `F^+ S^T p` per column.
fn linear_inversion(s: &DMatrix<f64>, p: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let frame = s.transpose() * s;
    let eig = SymmetricEigen::new(frame);
    let top = eig.eigenvalues.max();
    let bottom = eig.eigenvalues.min();
    let complete = bottom > 0.0 && top / bottom < MAX_FRAME_CONDITION;
    let cutoff = top * 1e-12;
    let inv_diag = eig.eigenvalues.map(|v| if v > cutoff { 1.0 / v } else { 0.0 });
    let pinv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_diag) * eig.eigenvectors.transpose();
    (pinv * s.transpose() * p, complete)
}

/// Clamps negative eigenvalues to zero and removes the clamped mass equally
/// from the remaining positive ones, repeating until none is negative.
pub fn rescale_eigenvalues(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    loop {
        let negative: f64 = out.iter().filter(|&&v| v < 0.0).sum();
        if negative >= 0.0 {
            return out;
        }
        let positive = out.iter().filter(|&&v| v > 0.0).count();
        for v in out.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        if positive == 0 {
            return out;
        }
        let shift = negative / positive as f64;
        for v in out.iter_mut() {
            if *v > 0.0 {
                *v += shift;
            }
        }
    }
}

fn rescale_psd(h: &CMatrix) -> CMatrix {
    let eig = eig_hermitian_unchecked(h);
    let rescaled = rescale_eigenvalues(&eig.values);
    let mut scaled = eig.vectors.clone();
    for (j, &lam) in rescaled.iter().enumerate() {
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= lam;
        }
    }
    crate::qmat::hermitian_part(&(scaled * eig.vectors.adjoint()))
}

/// Unrescaled linear-inversion estimates `sum_j p_j D_j` for every `s`.
/// With `readout` the duals are built from the readout-mixed basis.
pub fn fit_lin_raw(data: &ConditionalDataset, readout: Option<&AssignmentMatrix>) -> Result<(Vec<CMatrix>, bool)> {
    let rows = included_rows(data);
    if rows.is_empty() {
        return Err(Error::IncompleteBasis { rank: 0, dim: 1 << (2 * (data.k_in + data.k_out)) });
    }
    let basis = basis_for(data, readout);
    let s = design_matrix(&basis, &rows);
    let p = frequency_matrix(data, &rows);
    let (coef, complete) = linear_inversion(&s, &p);
    let d = basis.dim();
    let blocks = (0..coef.ncols())
        .map(|j| real_to_herm(coef.column(j).as_slice(), d))
        .collect();
    Ok((blocks, complete))
}

/// LIN estimate of every conditional tensor: linear inversion, eigenvalue
/// rescaling, then trace fixed to `2^k_in` times the estimated weight of `s`.
/// Incomplete frames (partial data) use pseudo-inverse duals and set
/// `low_confidence`.
pub fn fit_lin(data: &ConditionalDataset, readout: Option<&AssignmentMatrix>) -> Result<FitResult> {
    let (raw, complete) = fit_lin_raw(data, readout)?;
    if data.is_complete() && !complete {
        let dim = raw[0].nrows() * raw[0].nrows();
        return Err(Error::IncompleteBasis { rank: dim - 1, dim });
    }
    let d_in = (1usize << data.k_in) as f64;
    let mut weights: Vec<f64> = raw
        .iter()
        .map(|t| (crate::qmat::trace(t).re / d_in).max(0.0))
        .collect();
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        weights.iter_mut().for_each(|w| *w /= total);
    }
    let mut min_before = f64::INFINITY;
    let tensors = raw
        .iter()
        .zip(&weights)
        .map(|(t, &w)| {
            min_before = min_before.min(eig_hermitian_unchecked(t).min());
            let r = rescale_psd(t);
            let tr = crate::qmat::trace(&r).re;
            let target = d_in * w;
            let fixed = if tr > 0.0 { r.scale(target / tr) } else { r.scale(0.0) };
            ChoiTensor::new(data.k_in, data.k_out, fixed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FitResult {
        fitter: Fitter::Lin,
        tensors,
        diagnostics: FitDiagnostics {
            iterations: 0,
            residual: 0.0,
            min_eigenvalue_before: min_before,
            converged: true,
            low_confidence: !complete,
        },
    })
}

/// LIN estimate of one conditional tensor.
pub fn fit_lin_block(data: &ConditionalDataset, s: usize, readout: Option<&AssignmentMatrix>) -> Result<ChoiTensor> {
    check_block(data, s)?;
    Ok(fit_lin(data, readout)?.tensors.swap_remove(s))
}

fn check_block(data: &ConditionalDataset, s: usize) -> Result<()> {
    if s >= data.num_conditioning_outcomes() {
        return Err(Error::Parameter(format!(
            "conditioning outcome {s} out of range for m = {}",
            data.m
        )));
    }
    Ok(())
}

/// Least-squares problem `min 1/2 sum w^2 (S X P^T - F)^2` over stacked
/// Hermitian blocks `X`, subject to positivity and the affine constraint.
struct Problem {
    s: DMatrix<f64>,
    freq: DMatrix<f64>,
    w2: DMatrix<f64>,
    mix: Option<DMatrix<f64>>,
    d_in: usize,
    d_out: usize,
    lipschitz: f64,
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

impl Problem {
    fn new(
        data: &ConditionalDataset,
        readout_basis: Option<&AssignmentMatrix>,
        mix: Option<DMatrix<f64>>,
        weighting: Weighting,
    ) -> Result<Self> {
        let rows = included_rows(data);
        if rows.is_empty() {
            return Err(Error::Parameter("dataset has no included settings".into()));
        }
        let basis = basis_for(data, readout_basis);
        let s = design_matrix(&basis, &rows);
        let freq = frequency_matrix(data, &rows);
        let w2 = match (weighting, data.shots) {
            (Weighting::Binomial, Shots::Finite(n)) => {
                let n = n as f64;
                freq.map(|p| {
                    let sigma = (p * (1.0 - p) / n).sqrt().max(1.0 / n);
                    1.0 / (sigma * sigma)
                })
            }
            _ => DMatrix::from_element(freq.nrows(), freq.ncols(), 1.0),
        };
        let mix_norm = mix.as_ref().map_or(1.0, spectral_norm);
        let lipschitz = spectral_norm(&s).powi(2) * mix_norm.powi(2) * w2.max();
        Ok(Self {
            s,
            freq,
            w2,
            mix,
            d_in: 1 << data.k_in,
            d_out: 1 << data.k_out,
            lipschitz,
        })
    }

    fn predict(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let sx = &self.s * x;
        match &self.mix {
            Some(p) => sx * p.transpose(),
            None => sx,
        }
    }

    fn objective(&self, x: &DMatrix<f64>) -> f64 {
        let r = self.predict(x) - &self.freq;
        0.5 * r.component_mul(&r).component_mul(&self.w2).sum()
    }

    fn gradient(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let r = (self.predict(x) - &self.freq).component_mul(&self.w2);
        let g = self.s.transpose() * r;
        match &self.mix {
            Some(p) => g * p,
            None => g,
        }
    }

    fn dim(&self) -> usize {
        self.d_in * self.d_out
    }
}

fn psd_project_column(x: &[f64], d: usize) -> (Vec<f64>, f64) {
    let h = real_to_herm(x, d);
    let eig = eig_hermitian_unchecked(&h);
    let min = eig.min();
    if min >= 0.0 {
        return (x.to_vec(), min);
    }
    (herm_to_real(&eig.map(|v| v.max(0.0))), min)
}

fn psd_project(x: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let mut out = x.clone();
    for j in 0..x.ncols() {
        let (col, _) = psd_project_column(x.column(j).as_slice(), d);
        out.column_mut(j).copy_from_slice(&col);
    }
    out
}

/// Projection onto `{ sum_s Tr_out X_s = I }`.
fn affine_project(x: &DMatrix<f64>, d_in: usize, d_out: usize) -> DMatrix<f64> {
    let d = d_in * d_out;
    let blocks = x.ncols();
    let mut sum = CMatrix::zeros(d_in, d_in);
    for j in 0..blocks {
        sum += partial_trace_second(&real_to_herm(x.column(j).as_slice(), d), d_in, d_out);
    }
    let excess = sum - CMatrix::identity(d_in, d_in);
    let correction = herm_to_real(
        &excess
            .kronecker(&CMatrix::identity(d_out, d_out))
            .scale(1.0 / (blocks * d_out) as f64),
    );
    let mut out = x.clone();
    for j in 0..blocks {
        for (i, c) in correction.iter().enumerate() {
            out[(i, j)] -= c;
        }
    }
    out
}

/// Dykstra alternating projection onto PSD blocks intersected with the
/// affine set. Returns the final PSD iterate.
fn feasible_project(x: &DMatrix<f64>, problem: &Problem, opts: &ClsOptions) -> DMatrix<f64> {
    let d = problem.dim();
    if opts.constraint == AffineConstraint::None {
        return psd_project(x, d);
    }
    let mut cur = x.clone();
    let mut p = DMatrix::zeros(x.nrows(), x.ncols());
    let mut q = DMatrix::zeros(x.nrows(), x.ncols());
    let mut y = psd_project(&cur, d);
    for _ in 0..opts.dykstra_max_iterations {
        y = psd_project(&(&cur + &p), d);
        p = &cur + &p - &y;
        let next = affine_project(&(&y + &q), problem.d_in, problem.d_out);
        q = &y + &q - &next;
        let change = (&next - &cur).norm();
        cur = next;
        if change < opts.dykstra_tolerance && (&cur - &y).norm() < opts.dykstra_tolerance * 10.0 {
            break;
        }
    }
    y
}

/// Accelerated projected gradient with function-value restart.
fn solve(problem: &Problem, x0: DMatrix<f64>, opts: &ClsOptions) -> (DMatrix<f64>, FitDiagnostics) {
    let step = 1.0 / problem.lipschitz.max(f64::MIN_POSITIVE);
    let mut x = feasible_project(&x0, problem, opts);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut f_prev = problem.objective(&x);
    let mut iterations = 0;
    let mut converged = f_prev <= 1e-24;
    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let g = problem.gradient(&y);
        let x_new = feasible_project(&(&y - g * step), problem, opts);
        let f_new = problem.objective(&x_new);
        if f_new > f_prev && t > 1.0 {
            // Momentum overshoot: restart from the last accepted point.
            t = 1.0;
            y = x.clone();
            continue;
        }
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &x_new + (&x_new - &x) * ((t - 1.0) / t_new);
        let rel = (f_prev - f_new).abs() / f_prev.max(1e-300);
        converged = f_new <= 1e-24 || rel < opts.tolerance;
        x = x_new;
        f_prev = f_new;
        t = t_new;
    }
    let diag = FitDiagnostics {
        iterations,
        residual: f_prev,
        min_eigenvalue_before: f64::NAN,
        converged,
        low_confidence: false,
    };
    (x, diag)
}

fn to_tensors(x: &DMatrix<f64>, data: &ConditionalDataset) -> Result<Vec<ChoiTensor>> {
    let d = 1usize << (data.k_in + data.k_out);
    (0..x.ncols())
        .map(|j| ChoiTensor::new(data.k_in, data.k_out, real_to_herm(x.column(j).as_slice(), d)))
        .collect()
}

fn raw_start(data: &ConditionalDataset, readout: Option<&AssignmentMatrix>) -> Result<(DMatrix<f64>, f64)> {
    let (raw, _) = fit_lin_raw(data, readout)?;
    let n = raw[0].nrows() * raw[0].nrows();
    let mut x = DMatrix::zeros(n, raw.len());
    let mut min = f64::INFINITY;
    for (j, t) in raw.iter().enumerate() {
        min = min.min(eig_hermitian_unchecked(t).min());
        x.column_mut(j).copy_from_slice(&herm_to_real(t));
    }
    Ok((x, min))
}

/// Constrained least squares over all conditioning blocks jointly (the
/// blocks couple only through the affine constraint).
pub fn fit_cls(data: &ConditionalDataset, opts: &ClsOptions) -> Result<FitResult> {
    let problem = Problem::new(data, None, None, opts.weighting)?;
    let (x0, min_before) = raw_start(data, None)?;
    let (x, mut diag) = solve(&problem, x0, opts);
    diag.min_eigenvalue_before = min_before;
    Ok(FitResult {
        fitter: Fitter::Cls,
        tensors: to_tensors(&x, data)?,
        diagnostics: diag,
    })
}

/// CLS estimate of one conditional tensor.
pub fn fit_cls_block(data: &ConditionalDataset, s: usize, opts: &ClsOptions) -> Result<ChoiTensor> {
    check_block(data, s)?;
    Ok(fit_cls(data, opts)?.tensors.swap_remove(s))
}

/// `P(s|s')` over `m` conditioning bits, first bit most significant.
pub fn conditioning_mixing(a: &AssignmentMatrix, m: usize) -> DMatrix<f64> {
    let single = DMatrix::from_row_slice(2, 2, &[a.0[0][0], a.0[0][1], a.0[1][0], a.0[1][1]]);
    (0..m).fold(DMatrix::from_element(1, 1, 1.0), |acc, _| acc.kronecker(&single))
}

/// Readout-mitigated CLS: one joint fit of all blocks in which the model
/// mixes blocks by `P(s|s')` and uses readout-mixed cut measurements.
pub fn fit_memcls(data: &ConditionalDataset, a: &AssignmentMatrix, opts: &ClsOptions) -> Result<FitResult> {
    let det = a.det();
    if det.abs() < 1e-12 {
        return Err(Error::SingularAssignment { det });
    }
    let mix = conditioning_mixing(a, data.m);
    let problem = Problem::new(data, Some(a), Some(mix), opts.weighting)?;
    let (x0, min_before) = raw_start(data, Some(a))?;
    // Undo the conditioning mixing in the starting point.
    let inv = a.inverse()?;
    let inv_mix = conditioning_mixing(&AssignmentMatrix(inv), data.m);
    let x0 = x0 * inv_mix.transpose();
    let (x, mut diag) = solve(&problem, x0, opts);
    diag.min_eigenvalue_before = min_before;
    Ok(FitResult {
        fitter: Fitter::Memcls,
        tensors: to_tensors(&x, data)?,
        diagnostics: diag,
    })
}

/// Runs the named fitter. MEMCLS needs the readout assignment matrix.
pub fn fit(
    fitter: Fitter,
    data: &ConditionalDataset,
    readout: Option<&AssignmentMatrix>,
    opts: &ClsOptions,
) -> Result<FitResult> {
    match fitter {
        Fitter::Lin => fit_lin(data, None),
        Fitter::Cls => fit_cls(data, opts),
        Fitter::Memcls => {
            let a = readout.copied().unwrap_or_else(AssignmentMatrix::identity);
            fit_memcls(data, &a, opts)
        }
    }
}
