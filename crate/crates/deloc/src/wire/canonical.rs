use nalgebra::{Matrix2, Vector2};

use super::WireTensors;
use crate::qcore::{cr, C64};
use crate::{Error, Result};

/// Canonical decomposition A[m0] = r0|φ0⟩⟨e0|, A[m1] = r1|φ0⟩⟨e0| + |φ1⟩⟨e1|.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalBasis {
    pub m: [Vector2<C64>; 2],
    pub e: [Vector2<C64>; 2],
    pub varphi: [Vector2<C64>; 2],
    pub r0: f64,
    pub r1: C64,
    /// Bloch angles of φ0 = (cos θ/2, e^{iα} sin θ/2) up to a global phase.
    pub theta: f64,
    pub alpha: f64,
}

impl CanonicalBasis {
    /// Largest deviation of the tensors from the canonical structure.
    pub fn structure_defect(&self, t: &WireTensors) -> f64 {
        let b0 = t.op(&self.m[0]);
        let b1 = t.op(&self.m[1]);
        let want0 = self.varphi[0] * self.e[0].adjoint() * cr(self.r0);
        let want1 = self.varphi[0] * self.e[0].adjoint() * self.r1 + self.varphi[1] * self.e[1].adjoint();
        crate::qcore::max_abs(&(b0 - want0)).max(crate::qcore::max_abs(&(b1 - want1)))
    }
}

fn complement(v: &Vector2<C64>) -> Vector2<C64> {
    Vector2::new(-v[1].conj(), v[0].conj())
}

/// Rotates the global phase so the largest component is real and positive.
fn fix_phase(v: Vector2<C64>) -> Vector2<C64> {
    let k = if v[0].norm() >= v[1].norm() { 0 } else { 1 };
    if v[k].norm() < 1e-300 {
        return v;
    }
    v * (v[k].conj() / cr(v[k].norm()))
}

fn det(m: &Matrix2<C64>) -> C64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

/// Candidate m0 vectors: roots of det(A[m]) = 0 plus the computational basis.
fn candidates(a: &[Matrix2<C64>; 2]) -> Vec<Vector2<C64>> {
    let (p, q) = (&a[0], &a[1]);
    // det(x P + y Q) = c2 x² + c1 x y + c0 y², with A[m] = conj(m0) P + conj(m1) Q.
    let c2 = det(p);
    let c0 = det(q);
    let c1 = p[(0, 0)] * q[(1, 1)] + p[(1, 1)] * q[(0, 0)] - p[(0, 1)] * q[(1, 0)] - p[(1, 0)] * q[(0, 1)];
    let mut xy: Vec<(C64, C64)> = vec![(cr(1.0), cr(0.0)), (cr(0.0), cr(1.0))];
    let scale = c2.norm().max(c1.norm()).max(c0.norm());
    if scale > 1e-14 {
        if c2.norm() < 1e-12 * scale {
            if c1.norm() > 1e-12 * scale {
                xy.push((-c0, c1));
            }
        } else {
            let disc = (c1 * c1 - cr(4.0) * c2 * c0).sqrt();
            for s in [1.0, -1.0] {
                xy.push(((-c1 + disc * cr(s)) / (cr(2.0) * c2), cr(1.0)));
            }
        }
    }
    xy.into_iter()
        .filter_map(|(x, y)| {
            let v = Vector2::new(x.conj(), y.conj());
            let n = v.norm();
            (n > 1e-300 && n.is_finite()).then(|| fix_phase(v / cr(n)))
        })
        .collect()
}

fn try_candidate(t: &WireTensors, m0: Vector2<C64>) -> Option<(CanonicalBasis, f64)> {
    let m1 = fix_phase(complement(&m0));
    let b0 = t.op(&m0);
    let b1 = t.op(&m1);
    let (r0, varphi0, e0) = if b0.norm() < 1e-9 {
        let e0 = Vector2::new(cr(1.0), cr(0.0));
        let col = b1 * e0;
        let n = col.norm();
        let varphi0 = if n < 1e-9 {
            // r0 = r1 = 0: φ0 is any vector orthogonal to φ1.
            complement(&(b1 * Vector2::new(cr(0.0), cr(1.0))))
        } else {
            col / cr(n)
        };
        (0.0, varphi0, e0)
    } else {
        let svd = b0.svd(false, true);
        let vt = svd.v_t?;
        let k = if svd.singular_values[0] >= svd.singular_values[1] { 0 } else { 1 };
        let e0 = fix_phase(vt.row(k).adjoint());
        let varphi0 = b0 * e0 / cr(svd.singular_values[k]);
        (svd.singular_values[k], varphi0, e0)
    };
    let e1 = fix_phase(complement(&e0));
    let r1 = varphi0.dotc(&(b1 * e0));
    let varphi1 = b1 * e1;
    let cb = CanonicalBasis {
        m: [m0, m1],
        e: [e0, e1],
        varphi: [varphi0, varphi1],
        r0,
        r1,
        theta: 2.0 * varphi0[1].norm().atan2(varphi0[0].norm()),
        alpha: varphi0[1].arg() - varphi0[0].arg(),
    };
    let defect = cb
        .structure_defect(t)
        .max((varphi1.norm() - 1.0).abs())
        .max(varphi0.dotc(&varphi1).norm());
    Some((cb, defect))
}

/// Finds the canonical basis of a wire. Among valid decompositions the one
/// whose m0 is closest to |0⟩ is returned, so a period wire yields the
/// computational basis.
pub fn canonical_form(t: &WireTensors) -> Result<CanonicalBasis> {
    let mut best: Option<(CanonicalBasis, f64)> = None;
    for m0 in candidates(&t.a) {
        if let Some((cb, defect)) = try_candidate(t, m0) {
            if defect > 1e-8 {
                continue;
            }
            let score = cb.m[0][0].norm();
            if best.as_ref().is_none_or(|(b, _)| score > b.m[0][0].norm() + 1e-9) {
                best = Some((cb, defect));
            }
        }
    }
    best.map(|(cb, _)| cb)
        .ok_or_else(|| Error::CanonicalizationFailed("no basis puts the tensors in canonical form".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::PeriodWire;
    use std::f64::consts::PI;

    #[test]
    fn period_wire_is_computational() {
        for tau in 2..=6 {
            for k in 0..=12 {
                let phi = k as f64 * PI / 12.0;
                let w = PeriodWire::new(tau, phi, 3).unwrap();
                let t = w.tensors();
                let cb = canonical_form(&t).unwrap();
                assert!((cb.m[0][0].norm() - 1.0).abs() < 1e-9, "tau {tau} phi {phi}");
                let r0 = (cr(1.0) - C64::from_polar(1.0, -phi)) / cr(2.0);
                let r1 = (cr(1.0) + C64::from_polar(1.0, -phi)) / cr(2.0);
                assert!((cb.r0 - r0.norm()).abs() < 1e-10);
                assert!((cb.r1.norm() - r1.norm()).abs() < 1e-10);
                assert!(cb.structure_defect(&t) < 1e-10);
            }
        }
    }

    #[test]
    fn canonical_family_round_trip() {
        let th = 1.1f64;
        let al = 0.4f64;
        let v0 = Vector2::new(cr((th / 2.0).cos()), C64::from_polar((th / 2.0).sin(), al));
        let v1 = complement(&v0);
        let t = WireTensors::canonical(1.0, cr(0.0), v0, v1).unwrap();
        let cb = canonical_form(&t).unwrap();
        assert!(cb.r1.norm() < 1e-10);
        assert!((cb.theta - th).abs() < 1e-10);
        assert!((cb.alpha - al).abs() < 1e-10);
    }
}
