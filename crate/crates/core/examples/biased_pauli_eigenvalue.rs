//! Dominant eigenvalue of rho - E(rho) for the biased Pauli channel: closed
//! form against a numerical eigendecomposition.

use num_complex::Complex64;
use tomocut::mitigation::biased_dominant_eigenvalue;
use tomocut::noise::{make_channel, ChannelKind};
use tomocut::qmat::{eig_hermitian, CVector};

fn main() -> tomocut::Result<()> {
    let (p, theta) = (0.02, 0.7f64);
    let alpha = Complex64::new(theta.cos(), 0.0);
    let beta = Complex64::from_polar(theta.sin(), 0.3);
    let psi = CVector::from_vec(vec![alpha, beta]);
    let rho = &psi * psi.adjoint();
    println!("{:>6} {:>12} {:>12}", "b", "closed", "numeric");
    for b in [-1.0, -0.5, 0.0, 0.1, 0.5, 1.0] {
        let channel = make_channel(&ChannelKind::BiasedPauli { p, b, qubits: 1 })?;
        let numeric = eig_hermitian(&(&rho - channel.apply(&rho)?))?.max();
        let closed = biased_dominant_eigenvalue(p, b, alpha, beta)?;
        println!("{b:>6} {closed:>12.9} {numeric:>12.9}");
    }
    Ok(())
}
