//! Dense statevector engine.
//!
//! Amplitude index bit `i` belongs to `labels[i]`, so the first label is the
//! least-significant bit. Everything else in the crate goes through here when
//! it needs ground truth.

mod channel;
mod density;
mod measure;
mod state;

pub use channel::{kraus_from_map, KrausChannel, KrausMap};
pub use density::{fidelity, mutual_information, partial_trace, von_neumann_entropy, DensityOperator};
pub use measure::{bell_byproduct, bell_measurement, measure, Basis, MeasurementOutcome};
pub use state::PureState;
pub(crate) use state::check_labels;

use nalgebra::{DMatrix, Dim, Matrix, Matrix2, RawStorage, Vector2};
pub use num_complex::Complex64 as C64;

use crate::{Error, Result};

/// Site label. Wires use 1..=n; protocols add auxiliary labels around them.
pub type Site = usize;

/// Default tolerance for structural checks (hermiticity, unitarity, traces).
pub const TOL: f64 = 1e-10;

pub const DEFAULT_DENSE_CAP: usize = 20;
pub const DENSE_CAP_ENV: &str = "DELOC_DENSE_CAP";

/// Largest qubit count a dense state may have. `DELOC_DENSE_CAP` overrides it.
pub fn dense_cap() -> usize {
    std::env::var(DENSE_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_DENSE_CAP)
}

pub(crate) fn check_cap(n: usize) -> Result<()> {
    let cap = dense_cap();
    if n > cap {
        Err(Error::DenseCapExceeded { n, cap })
    } else {
        Ok(())
    }
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn ket0() -> Vector2<C64> {
    Vector2::new(cr(1.0), cr(0.0))
}

pub fn ket1() -> Vector2<C64> {
    Vector2::new(cr(0.0), cr(1.0))
}

pub fn ket_plus() -> Vector2<C64> {
    Vector2::new(cr(1.0), cr(1.0)) / cr(2f64.sqrt())
}

pub fn ket_minus() -> Vector2<C64> {
    Vector2::new(cr(1.0), cr(-1.0)) / cr(2f64.sqrt())
}

pub mod pauli {
    use super::*;

    pub fn i() -> Matrix2<C64> {
        Matrix2::identity()
    }
    pub fn x() -> Matrix2<C64> {
        Matrix2::new(cr(0.0), cr(1.0), cr(1.0), cr(0.0))
    }
    pub fn y() -> Matrix2<C64> {
        Matrix2::new(cr(0.0), c(0.0, -1.0), c(0.0, 1.0), cr(0.0))
    }
    pub fn z() -> Matrix2<C64> {
        Matrix2::new(cr(1.0), cr(0.0), cr(0.0), cr(-1.0))
    }
    pub fn h() -> Matrix2<C64> {
        Matrix2::new(cr(1.0), cr(1.0), cr(1.0), cr(-1.0)) / cr(2f64.sqrt())
    }
    /// X^a Z^b
    pub fn xz(a: bool, b: bool) -> Matrix2<C64> {
        let mut m = Matrix2::identity();
        if b {
            m = z() * m;
        }
        if a {
            m = x() * m;
        }
        m
    }
}

/// |Φ+⟩ on two labels, first label as the low bit.
pub fn phi_plus(a: Site, b: Site) -> PureState {
    bell_state(a, b, false, false)
}

/// (X^x Z^z ⊗ I)|Φ+⟩, the Pauli acting on `a`.
pub fn bell_state(a: Site, b: Site, x: bool, z: bool) -> PureState {
    let mut amps = DVector::zeros(4);
    let s = 1.0 / 2f64.sqrt();
    for bit in 0..2usize {
        let sign = if z && bit == 1 { -s } else { s };
        let low = bit ^ (x as usize);
        amps[low + 2 * bit] = cr(sign);
    }
    PureState::new(vec![a, b], amps).expect("bell state")
}

pub use nalgebra::DVector;

pub fn to_dmatrix(m: &Matrix2<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(2, 2, |i, j| m[(i, j)])
}

pub fn is_unitary(m: &DMatrix<C64>, tol: f64) -> bool {
    m.is_square() && max_abs(&(m.adjoint() * m - DMatrix::identity(m.nrows(), m.ncols()))) < tol
}

/// Largest entry modulus.
pub fn max_abs<R: Dim, Cc: Dim, S: RawStorage<C64, R, Cc>>(m: &Matrix<C64, R, Cc, S>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.norm()))
}

/// Kronecker product with `a` acting on the low bits.
pub fn kron_low(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    b.kronecker(a)
}

/// Binary entropy in bits.
pub fn h2(p: f64) -> f64 {
    let f = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    f(p) + f(1.0 - p)
}

/// Random Haar-distributed single-qubit state.
pub fn haar_qubit<R: rand::Rng + ?Sized>(rng: &mut R) -> Vector2<C64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut g = || -> f64 { StandardNormal.sample(rng) };
    let v = Vector2::new(c(g(), g()), c(g(), g()));
    let n = v.norm();
    v / cr(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_states_are_orthonormal() {
        let all: Vec<_> = (0..4).map(|i| bell_state(1, 2, i >> 1 == 1, i & 1 == 1)).collect();
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                let o = a.inner(b).unwrap().norm();
                assert!((o - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn binary_entropy_spot() {
        assert!((h2(0.125) - 0.543_564_443_199_596).abs() < 1e-12);
        assert_eq!(h2(0.0), 0.0);
        assert!((h2(0.5) - 1.0).abs() < 1e-15);
    }
}
