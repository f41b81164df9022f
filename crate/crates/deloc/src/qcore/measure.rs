use nalgebra::{DMatrix, DVector};

use super::{c, cr, is_unitary, kron_low, PureState, Site, C64, TOL};
use crate::{Error, Result};

/// Orthonormal measurement basis on k qubits.
#[derive(Clone, Debug, PartialEq)]
pub enum Basis {
    Z,
    X,
    Y,
    /// Outcome 2a + b is (X^a Z^b ⊗ I)|Φ+⟩, the Pauli on the first site.
    Bell,
    /// Columns are the basis vectors.
    Custom(DMatrix<C64>),
}

impl Basis {
    pub fn matrix(&self, k: usize) -> Result<DMatrix<C64>> {
        let single = |m: [C64; 4]| DMatrix::from_row_slice(2, 2, &m);
        let s = 1.0 / 2f64.sqrt();
        let one = match self {
            Basis::Z => Some(single([cr(1.0), cr(0.0), cr(0.0), cr(1.0)])),
            Basis::X => Some(single([cr(s), cr(s), cr(s), cr(-s)])),
            Basis::Y => Some(single([cr(s), cr(s), c(0.0, s), c(0.0, -s)])),
            _ => None,
        };
        let m = match (self, one) {
            (_, Some(one)) => (1..k).fold(one.clone(), |acc, _| kron_low(&acc, &one)),
            (Basis::Bell, _) => {
                if k != 2 {
                    return Err(Error::InvalidBasis("Bell basis needs two sites".into()));
                }
                let mut m = DMatrix::zeros(4, 4);
                for idx in 0..4usize {
                    let (a, b) = bell_byproduct(idx);
                    for bit in 0..2usize {
                        let sign = if b && bit == 1 { -s } else { s };
                        m[((bit ^ a as usize) + 2 * bit, idx)] = cr(sign);
                    }
                }
                m
            }
            (Basis::Custom(m), _) => m.clone(),
            _ => unreachable!(),
        };
        if m.nrows() != 1 << k || !is_unitary(&m, TOL) {
            return Err(Error::InvalidBasis(format!("{}x{} matrix on {k} qubits", m.nrows(), m.ncols())));
        }
        Ok(m)
    }
}

/// Pauli by-product (a, b) encoded in a Bell outcome index.
pub fn bell_byproduct(idx: usize) -> (bool, bool) {
    (idx >> 1 == 1, idx & 1 == 1)
}

#[derive(Clone, Debug)]
pub struct MeasurementOutcome {
    pub outcome_index: usize,
    pub probability: f64,
    /// State of the unmeasured qubits; `None` when the branch has zero
    /// probability or nothing is left.
    pub post_state: Option<PureState>,
}

/// Projective measurement of `sites`; measured qubits are removed from the
/// post-measurement states.
pub fn measure(state: &PureState, sites: &[Site], basis: &Basis) -> Result<Vec<MeasurementOutcome>> {
    let m = basis.matrix(sites.len())?;
    (0..m.ncols())
        .map(|j| {
            let v: DVector<C64> = m.column(j).into_owned();
            let (p, post) = state.project_out(sites, &v)?;
            Ok(MeasurementOutcome { outcome_index: j, probability: p, post_state: post })
        })
        .collect()
}

pub fn bell_measurement(state: &PureState, site_a: Site, site_b: Site) -> Result<Vec<MeasurementOutcome>> {
    measure(state, &[site_a, site_b], &Basis::Bell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{ket0, ket_plus, pauli, phi_plus};
    use nalgebra::Vector2;

    #[test]
    fn x_measurement_of_zero() {
        let s = PureState::product(vec![1, 2], &[ket0(), ket0()]).unwrap();
        let out = measure(&s, &[1], &Basis::X).unwrap();
        assert!(out.iter().all(|o| (o.probability - 0.5).abs() < 1e-12));
    }

    #[test]
    fn z_measurement_leaves_other_site() {
        let s = PureState::product(vec![1, 2], &[ket_plus(), ket0()]).unwrap();
        for o in measure(&s, &[1], &Basis::Z).unwrap() {
            assert!((o.probability - 0.5).abs() < 1e-12);
            let post = o.post_state.unwrap();
            assert!((post.amplitudes()[0].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn teleportation_identity() {
        let phi = Vector2::new(c(0.6, 0.1), c(0.2, -0.7)).normalize();
        let payload = PureState::product(vec![3], &[phi]).unwrap();
        let s = phi_plus(1, 2).tensor(&payload).unwrap();
        let out = bell_measurement(&s, 2, 3).unwrap();
        let total: f64 = out.iter().map(|o| o.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for o in out {
            assert!((o.probability - 0.25).abs() < 1e-12);
            let (a, b) = bell_byproduct(o.outcome_index);
            let expect = PureState::product(vec![1], &[pauli::xz(a, b) * phi]).unwrap();
            assert!(o.post_state.unwrap().approx_eq_phase(&expect, 1e-12));
        }
    }

    #[test]
    fn bell_self_measurement() {
        let s = phi_plus(1, 2);
        let out = bell_measurement(&s, 1, 2).unwrap();
        assert!((out[0].probability - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_unitary_basis_rejected() {
        let s = PureState::product(vec![1], &[ket0()]).unwrap();
        let bad = DMatrix::from_row_slice(2, 2, &[cr(1.0), cr(1.0), cr(0.0), cr(1.0)]);
        assert!(matches!(measure(&s, &[1], &Basis::Custom(bad)), Err(Error::InvalidBasis(_))));
    }
}
