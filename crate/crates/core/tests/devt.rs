use num_complex::Complex64;
use proptest::prelude::*;
use tomocut::circuit::haar_unitary;
use tomocut::mitigation::{coherent_mismatch, devt, devt_conditional};
use tomocut::qmat::{eig_hermitian, CMatrix, CVector, ChoiTensor};
use tomocut::seed;

fn mixture(dim: usize, p: f64, rank: usize, s: u64) -> (CMatrix, CVector, f64) {
    use rand::Rng;
    let mut rng = seed::stream(s, &[]);
    let psi: CVector = haar_unitary(dim, &mut rng).column(0).into_owned();
    let g = CMatrix::from_fn(dim, rank, |_, _| {
        Complex64::new(rng.sample(rand_distr::StandardNormal), rng.sample(rand_distr::StandardNormal))
    });
    let m = &g * g.adjoint();
    let err = m.unscale(m.trace().re);
    let mu1 = eig_hermitian(&err).unwrap().max();
    let rho = (&psi * psi.adjoint()).scale(1.0 - p) + err.scale(p);
    (rho, psi, mu1)
}

proptest! {
    // The closed two-level worst case, not its truncated series, bounds the mismatch.
    #[test]
    fn mismatch_within_two_level_worst_case(dim_pow in 1u32..4, rank_frac in 0.0f64..1.0, p in 1e-4f64..0.2, s in any::<u64>()) {
        let dim = 1usize << dim_pow;
        let rank = 1 + (rank_frac * dim as f64) as usize % dim;
        let (rho, psi, mu1) = mixture(dim, p, rank, s);
        let delta = p * mu1 / (1.0 - p);
        let worst = (1.0 - (1.0 - delta * delta).sqrt()) / 2.0;
        prop_assert!(coherent_mismatch(&rho, &psi).unwrap() <= worst + 1e-12);
    }
}

#[test]
fn devt_removes_depolarizing_noise_from_unitary_channel() {
    let u = haar_unitary(2, &mut seed::stream(1, &[]));
    let ideal = ChoiTensor::unitary(&u).unwrap();
    // Depolarizing after the gate: mix the ideal Choi with I/2 on the output.
    let noisy = ChoiTensor::new(1, 1, ideal.matrix().scale(0.9) + CMatrix::identity(4, 4).scale(0.05)).unwrap();
    let r = devt(&noisy).unwrap();
    assert!(r.truncated.distance(&ideal) < 1e-10);
    assert!((r.discarded_weight - 0.075).abs() < 1e-12);
}

#[test]
fn conditional_devt_keeps_total_trace() {
    let u = haar_unitary(2, &mut seed::stream(2, &[]));
    let ideal = ChoiTensor::unitary(&u).unwrap();
    let blocks: Vec<ChoiTensor> = [0.3, 0.7]
        .iter()
        .map(|w| ChoiTensor::new(1, 1, ideal.matrix().scale(0.9 * w) + CMatrix::identity(4, 4).scale(0.05 * w)).unwrap())
        .collect();
    let out = devt_conditional(&blocks).unwrap();
    let total: f64 = out.iter().map(|r| r.truncated.trace()).sum();
    assert!((total - 2.0).abs() < 1e-12);
    assert!((out[0].truncated.trace() / out[1].truncated.trace() - 0.3 / 0.7).abs() < 1e-12);
}
