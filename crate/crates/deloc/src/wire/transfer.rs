use nalgebra::{DMatrix, Schur};

use super::WireTensors;
use crate::qcore::C64;

/// Transfer matrix E = Σ_s A[s] ⊗ conj(A[s]) and its spectrum, largest modulus first.
#[derive(Clone, Debug)]
pub struct TransferMatrix {
    pub e: DMatrix<C64>,
    pub eigenvalues: Vec<C64>,
}

pub fn transfer_matrix(t: &WireTensors) -> TransferMatrix {
    let e = t.a.iter().fold(DMatrix::zeros(4, 4), |acc, a| {
        let a = DMatrix::from_fn(2, 2, |i, j| a[(i, j)]);
        acc + a.kronecker(&a.map(|x| x.conj()))
    });
    let schur = Schur::new(e.clone());
    let (_, tri) = schur.unpack();
    let mut eigenvalues: Vec<C64> = (0..4).map(|i| tri[(i, i)]).collect();
    eigenvalues.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    TransferMatrix { e, eigenvalues }
}

/// Ratio |λ2|/|λ1| below which correlations are treated as absent. A
/// nilpotent block of E only resolves to about √ε, hence the loose cutoff.
pub const XI_ZERO_RATIO: f64 = 1e-7;

/// ξ = −1/ln(|λ2|/|λ1|); 0 when λ2 vanishes, ∞ when it is degenerate with λ1.
pub fn correlation_length(tm: &TransferMatrix) -> f64 {
    let l1 = tm.eigenvalues[0].norm();
    let l2 = tm.eigenvalues[1].norm();
    if l1 < 1e-300 {
        return 0.0;
    }
    let ratio = l2 / l1;
    if ratio < XI_ZERO_RATIO {
        0.0
    } else if (l1 - l2).abs() < 1e-12 {
        f64::INFINITY
    } else {
        -1.0 / ratio.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::PeriodWire;
    use std::f64::consts::PI;

    #[test]
    fn leading_eigenvalue_is_one() {
        for tau in 2..=6 {
            for k in 0..=4 {
                let w = PeriodWire::new(tau, k as f64 * PI / 4.0, 3).unwrap();
                let tm = transfer_matrix(&w.tensors());
                assert!((tm.eigenvalues[0].norm() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_phi_spectrum_is_unitary() {
        // A[0] vanishes at φ = 0, so E = G ⊗ conj(G) has a flat spectrum.
        let w = PeriodWire::new(3, 0.0, 3).unwrap();
        let tm = transfer_matrix(&w.tensors());
        assert!(tm.eigenvalues.iter().all(|l| (l.norm() - 1.0).abs() < 1e-12));
        assert!(correlation_length(&tm).is_infinite());
    }
}
