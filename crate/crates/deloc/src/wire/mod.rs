//! Period wires: two-dimensional MPS with a fixed rotation per site.
//!
//! Amplitudes are ⟨s_n|A[s_{n−1}]⋯A[s_1]|L⟩, so the last physical qubit
//! doubles as the right boundary. Tensors use A[+] = G/√2 and
//! A[−] = G·D(φ)/√2 with G = exp(iπX/τ) and D(φ) = diag(−e^{−iφ}, −1). The
//! sign of D makes the canonical basis the computational one.

mod canonical;
mod mpo;
mod transfer;

pub use canonical::{canonical_form, CanonicalBasis};
pub use mpo::{reduced_density_mpo, single_site_entropy, wire_entropy_profile, wire_mutual_info, LeftEnv};
pub use transfer::{correlation_length, transfer_matrix, TransferMatrix};

use nalgebra::{DVector, Matrix2, Vector2};

use crate::qcore::{c, check_cap, cr, ket_plus, max_abs, PureState, Site, C64};
use crate::{Error, Result};

/// Site tensors of a wire in the computational physical basis.
#[derive(Clone, Debug, PartialEq)]
pub struct WireTensors {
    pub a: [Matrix2<C64>; 2],
}

impl WireTensors {
    pub fn new(a0: Matrix2<C64>, a1: Matrix2<C64>) -> Result<Self> {
        let t = WireTensors { a: [a0, a1] };
        let defect = t.isometry_defect();
        if defect > 1e-10 {
            return Err(Error::InvalidWire(format!("tensors are not an isometry (defect {defect:e})")));
        }
        Ok(t)
    }

    /// Σ_s A[s]†A[s] − I, max entry modulus.
    pub fn isometry_defect(&self) -> f64 {
        let s = self.a[0].adjoint() * self.a[0] + self.a[1].adjoint() * self.a[1];
        max_abs(&(s - Matrix2::identity()))
    }

    /// A[m] = Σ_i ⟨m|i⟩ A[i], the operator applied when a site is found in |m⟩.
    pub fn op(&self, m: &Vector2<C64>) -> Matrix2<C64> {
        self.a[0] * m[0].conj() + self.a[1] * m[1].conj()
    }

    /// Tensors built from a canonical decomposition (computational m basis):
    /// A[0] = r0|φ0⟩⟨0|, A[1] = r1|φ0⟩⟨0| + |φ1⟩⟨1|.
    pub fn canonical(r0: f64, r1: C64, varphi0: Vector2<C64>, varphi1: Vector2<C64>) -> Result<Self> {
        let e0 = Vector2::new(cr(1.0), cr(0.0));
        let e1 = Vector2::new(cr(0.0), cr(1.0));
        let a0 = varphi0 * e0.adjoint() * cr(r0);
        let a1 = varphi0 * e0.adjoint() * r1 + varphi1 * e1.adjoint();
        Self::new(a0, a1)
    }
}

/// G = exp(iπX/τ).
pub fn rotation(tau: u32) -> Matrix2<C64> {
    let t = std::f64::consts::PI / tau as f64;
    Matrix2::new(cr(t.cos()), c(0.0, t.sin()), c(0.0, t.sin()), cr(t.cos()))
}

/// D(φ) = diag(−e^{−iφ}, −1).
pub fn phase(phi: f64) -> Matrix2<C64> {
    Matrix2::new(-C64::from_polar(1.0, -phi), cr(0.0), cr(0.0), cr(-1.0))
}

/// Parameters of a period wire.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodWire {
    tau: u32,
    phi: f64,
    n: usize,
    left: Vector2<C64>,
}

impl PeriodWire {
    pub fn new(tau: u32, phi: f64, n: usize) -> Result<Self> {
        if tau < 2 {
            return Err(Error::InvalidWire(format!("period must be an integer >= 2, got {tau}")));
        }
        if !(0.0..=std::f64::consts::PI + 1e-12).contains(&phi) {
            return Err(Error::InvalidWire(format!("entanglement factor {phi} outside [0, pi]")));
        }
        if n < 1 {
            return Err(Error::InvalidWire("a wire needs at least one site".into()));
        }
        Ok(PeriodWire { tau, phi: phi.min(std::f64::consts::PI), n, left: ket_plus() })
    }

    /// Accepts a real-valued period and rejects anything non-integral.
    pub fn from_real_period(tau: f64, phi: f64, n: usize) -> Result<Self> {
        if tau.fract() != 0.0 || tau < 2.0 || tau > u32::MAX as f64 {
            return Err(Error::InvalidWire(format!("period must be an integer >= 2, got {tau}")));
        }
        Self::new(tau as u32, phi, n)
    }

    pub fn with_left(mut self, left: Vector2<C64>) -> Result<Self> {
        let norm = left.norm();
        if norm < 1e-12 {
            return Err(Error::InvalidWire("left boundary has zero norm".into()));
        }
        self.left = left / cr(norm);
        Ok(self)
    }

    pub fn with_len(mut self, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidWire("a wire needs at least one site".into()));
        }
        self.n = n;
        Ok(self)
    }

    pub fn tau(&self) -> u32 {
        self.tau
    }
    pub fn phi(&self) -> f64 {
        self.phi
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn left(&self) -> Vector2<C64> {
        self.left
    }

    pub fn g(&self) -> Matrix2<C64> {
        rotation(self.tau)
    }

    pub fn a_plus(&self) -> Matrix2<C64> {
        self.g() / cr(2f64.sqrt())
    }

    pub fn a_minus(&self) -> Matrix2<C64> {
        self.g() * phase(self.phi) / cr(2f64.sqrt())
    }

    pub fn tensors(&self) -> WireTensors {
        let s = cr(2f64.sqrt());
        let (p, m) = (self.a_plus(), self.a_minus());
        WireTensors { a: [(p + m) / s, (p - m) / s] }
    }

    pub fn chain(&self) -> Chain {
        Chain { tensors: self.tensors(), n: self.n, left: self.left }
    }

    pub fn is_maximal(&self) -> bool {
        (self.phi - std::f64::consts::PI).abs() < 1e-12
    }
}

/// Any translation-invariant two-dimensional wire: tensors, length, left boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    pub tensors: WireTensors,
    pub n: usize,
    pub left: Vector2<C64>,
}

impl Chain {
    pub fn new(tensors: WireTensors, n: usize, left: Vector2<C64>) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidWire("a wire needs at least one site".into()));
        }
        Ok(Chain { tensors, n, left })
    }

    /// Unnormalized amplitudes ⟨s_n|A[s_{n−1}]⋯A[s_1]|L⟩ with site 1 on the low bit. `site_op`
    /// may replace the tensors of one site.
    pub fn raw_amplitudes(&self, left: &Vector2<C64>, site_op: Option<(Site, &[Matrix2<C64>; 2])>) -> Result<DVector<C64>> {
        check_cap(self.n)?;
        let mut vecs: Vec<Vector2<C64>> = vec![*left];
        for s in 1..self.n {
            let a = match site_op {
                Some((q, ops)) if q == s => ops,
                _ => &self.tensors.a,
            };
            let half = vecs.len();
            let mut next = Vec::with_capacity(2 * half);
            for b in 0..2 {
                next.extend(vecs.iter().map(|v| a[b] * v));
            }
            debug_assert_eq!(next.len(), 2 * half);
            vecs = next;
        }
        let half = vecs.len();
        let mut amps = DVector::zeros(2 * half);
        for (idx, v) in vecs.iter().enumerate() {
            amps[idx] = v[0];
            amps[idx + half] = v[1];
        }
        Ok(amps)
    }

    /// Normalized wire state on sites `first..first+n`.
    pub fn state_at(&self, first: Site) -> Result<PureState> {
        let amps = self.raw_amplitudes(&self.left, None)?;
        if amps.norm() < 1e-12 {
            return Err(Error::DegenerateWire);
        }
        PureState::new((first..first + self.n).collect(), amps)
    }

    pub fn state(&self) -> Result<PureState> {
        self.state_at(1)
    }

    /// State with the tensors of site `q` replaced by `f(A[s])`.
    pub fn state_with_site_map(&self, q: Site, f: impl Fn(&Matrix2<C64>) -> Matrix2<C64>) -> Result<PureState> {
        let ops = [f(&self.tensors.a[0]), f(&self.tensors.a[1])];
        let amps = self.raw_amplitudes(&self.left, Some((q, &ops)))?;
        if amps.norm() < 1e-12 {
            return Err(Error::DegenerateWire);
        }
        PureState::new((1..=self.n).collect(), amps)
    }

    /// Σ_i |i⟩_aux Φ(|i⟩)/√2 with the reference on `aux` and the wire on 1..=n.
    pub fn logical_bell_state(&self, aux: Site) -> Result<PureState> {
        check_cap(self.n + 1)?;
        let a0 = self.raw_amplitudes(&Vector2::new(cr(1.0), cr(0.0)), None)?;
        let a1 = self.raw_amplitudes(&Vector2::new(cr(0.0), cr(1.0)), None)?;
        let dim = a0.len();
        let amps = DVector::from_fn(2 * dim, |i, _| if i % 2 == 0 { a0[i / 2] } else { a1[i / 2] });
        let mut labels = vec![aux];
        labels.extend(1..=self.n);
        if amps.norm() < 1e-12 {
            return Err(Error::DegenerateWire);
        }
        PureState::new(labels, amps)
    }
}

/// Normalized state of the wire on sites 1..=n.
pub fn build_wire_state(w: &PeriodWire) -> Result<PureState> {
    w.chain().state()
}

/// Reference qubit on `aux` sharing a logical Bell pair with the wire on 1..=n.
pub fn aux_bell_wire_state(w: &PeriodWire, aux: Site) -> Result<PureState> {
    w.chain().logical_bell_state(aux)
}

/// Logical Bell state of two period wires, the second on n+1..=n+n′.
pub fn logical_bell_wire_state(w: &PeriodWire, w2: &PeriodWire) -> Result<PureState> {
    two_wire_bell(&w.chain(), &w2.chain())
}

/// Logical Bell state of two wires, (Φ(0)Φ′(0) + Φ(1)Φ′(1))/√2; the second
/// wire occupies sites n+1..=n+n′.
pub fn two_wire_bell(w: &Chain, w2: &Chain) -> Result<PureState> {
    check_cap(w.n + w2.n)?;
    let basis = [Vector2::new(cr(1.0), cr(0.0)), Vector2::new(cr(0.0), cr(1.0))];
    let lo = w.raw_amplitudes(&basis[0], None)?.len();
    let mut amps = DVector::zeros(lo * (1 << w2.n));
    for b in &basis {
        let x = w.raw_amplitudes(b, None)?;
        let y = w2.raw_amplitudes(b, None)?;
        for (j, yj) in y.iter().enumerate() {
            for (i, xi) in x.iter().enumerate() {
                amps[i + lo * j] += xi * yj;
            }
        }
    }
    if amps.norm() < 1e-12 {
        return Err(Error::DegenerateWire);
    }
    PureState::new((1..=w.n + w2.n).collect(), amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn isometry_across_grid() {
        for tau in 2..=8 {
            for k in 0..=6 {
                let w = PeriodWire::new(tau, k as f64 * PI / 6.0, 4).unwrap();
                assert!(w.tensors().isometry_defect() < 1e-12);
                let s = w.a_plus().adjoint() * w.a_plus() + w.a_minus().adjoint() * w.a_minus();
                assert!(max_abs(&(s - Matrix2::identity())) < 1e-12);
            }
        }
    }

    #[test]
    fn non_integer_period_rejected() {
        assert!(matches!(PeriodWire::from_real_period(2.5, 1.0, 5), Err(Error::InvalidWire(_))));
        assert!(PeriodWire::from_real_period(4.0, 1.0, 5).is_ok());
        assert!(PeriodWire::new(1, 1.0, 5).is_err());
    }

    #[test]
    fn zero_phi_is_a_product_state() {
        let w = PeriodWire::new(3, 0.0, 4).unwrap();
        let s = w.chain().state().unwrap();
        for site in 1..=4 {
            assert!(s.reduced(&[site]).unwrap().von_neumann_entropy() < 1e-10);
        }
    }

    #[test]
    fn maximal_wire_bulk_is_mixed() {
        let w = PeriodWire::new(4, PI, 6).unwrap();
        let s = w.chain().state().unwrap();
        for site in 2..=5 {
            let r = s.reduced(&[site]).unwrap();
            assert!((r.von_neumann_entropy() - 1.0).abs() < 1e-10);
        }
    }
}
