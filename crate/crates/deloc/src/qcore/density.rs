use nalgebra::{DMatrix, SymmetricEigen};

use super::state::check_labels;
use super::{cr, max_abs, KrausChannel, PureState, Site, C64, TOL};
use crate::{Error, Result};

/// Hermitian, unit-trace, positive semidefinite operator over labeled qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    labels: Vec<Site>,
    matrix: DMatrix<C64>,
}

impl DensityOperator {
    /// Validates hermiticity, trace and positivity (all within 1e-10).
    pub fn new(labels: Vec<Site>, matrix: DMatrix<C64>) -> Result<Self> {
        let tr = matrix.trace();
        if matrix.is_square() && (tr - cr(1.0)).norm() > TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let rho = Self::new_unchecked(labels, matrix)?;
        let herm = max_abs(&(&rho.matrix - rho.matrix.adjoint()));
        if herm > TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:e})")));
        }
        let min = rho.raw_eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < -TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(rho)
    }

    /// Dimension and label checks only; the matrix is rescaled to unit trace.
    pub(crate) fn new_unchecked(labels: Vec<Site>, matrix: DMatrix<C64>) -> Result<Self> {
        check_labels(&labels)?;
        let d = 1usize << labels.len();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch(format!("{}x{} matrix for {} qubits", matrix.nrows(), matrix.ncols(), labels.len())));
        }
        let tr = matrix.trace().re;
        if !(tr > 1e-300) {
            return Err(Error::InvalidState("vanishing trace".into()));
        }
        Ok(DensityOperator { labels, matrix: matrix / cr(tr) })
    }

    pub fn maximally_mixed(labels: Vec<Site>) -> Result<Self> {
        let d = 1usize << labels.len();
        Self::new_unchecked(labels, DMatrix::identity(d, d))
    }

    /// Convex combination of operators on the same label set.
    pub fn mixture(parts: &[(f64, DensityOperator)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidState("empty mixture".into()))?;
        let labels = first.1.labels.clone();
        let d = first.1.matrix.nrows();
        let mut m = DMatrix::zeros(d, d);
        for (w, rho) in parts {
            let r = if rho.labels == labels { rho.clone() } else { rho.permuted(&labels)? };
            m += r.matrix * cr(*w);
        }
        Self::new_unchecked(labels, m)
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[Site] {
        &self.labels
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    fn position(&self, s: Site) -> Result<usize> {
        self.labels.iter().position(|&l| l == s).ok_or(Error::InvalidSite(s))
    }

    pub fn permuted(&self, order: &[Site]) -> Result<Self> {
        if order.len() != self.labels.len() {
            return Err(Error::DimensionMismatch("permutation length".into()));
        }
        check_labels(order)?;
        let pos: Vec<usize> = order.iter().map(|&s| self.position(s)).collect::<Result<_>>()?;
        let src = |idx: usize| -> usize { pos.iter().enumerate().map(|(i, p)| ((idx >> i) & 1) << p).sum() };
        let d = self.matrix.nrows();
        let map: Vec<usize> = (0..d).map(src).collect();
        let m = DMatrix::from_fn(d, d, |i, j| self.matrix[(map[i], map[j])]);
        Ok(DensityOperator { labels: order.to_vec(), matrix: m })
    }

    /// Traces out `sites`.
    pub fn partial_trace(&self, sites: &[Site]) -> Result<Self> {
        check_labels(sites)?;
        let tpos: Vec<usize> = sites.iter().map(|&s| self.position(s)).collect::<Result<_>>()?;
        let keep: Vec<usize> = (0..self.labels.len()).filter(|i| !tpos.contains(i)).collect();
        let labels: Vec<Site> = keep.iter().map(|&i| self.labels[i]).collect();
        let spread = |bits: usize, pos: &[usize]| -> usize { pos.iter().enumerate().map(|(j, p)| ((bits >> j) & 1) << p).sum() };
        let dk = 1usize << keep.len();
        let dt = 1usize << tpos.len();
        let mut m = DMatrix::zeros(dk, dk);
        for a in 0..dk {
            let ia = spread(a, &keep);
            for b in 0..dk {
                let ib = spread(b, &keep);
                let mut acc = cr(0.0);
                for t in 0..dt {
                    let it = spread(t, &tpos);
                    acc += self.matrix[(ia | it, ib | it)];
                }
                m[(a, b)] = acc;
            }
        }
        Ok(DensityOperator { labels, matrix: m })
    }

    /// Keeps `sites` (in the given order) and traces out the rest.
    pub fn reduced(&self, keep: &[Site]) -> Result<Self> {
        for &s in keep {
            self.position(s)?;
        }
        let out: Vec<Site> = self.labels.iter().copied().filter(|l| !keep.contains(l)).collect();
        self.partial_trace(&out)?.permuted(keep)
    }

    fn raw_eigenvalues(&self) -> Vec<f64> {
        let h = (&self.matrix + self.matrix.adjoint()) * cr(0.5);
        SymmetricEigen::new(h).eigenvalues.iter().copied().collect()
    }

    /// Eigenvalues with small negatives clipped to zero.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.raw_eigenvalues().into_iter().map(|x| x.max(0.0)).collect()
    }

    pub fn von_neumann_entropy(&self) -> f64 {
        self.eigenvalues().into_iter().filter(|&l| l > 1e-12).map(|l| -l * l.log2()).sum()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// ⟨target|ρ|target⟩.
    pub fn fidelity(&self, target: &PureState) -> Result<f64> {
        let t = if target.labels() == self.labels.as_slice() { target.clone() } else { target.permuted(&self.labels)? };
        let v = t.amplitudes();
        Ok((v.adjoint() * &self.matrix * v)[(0, 0)].re)
    }

    /// Applies a channel acting on `sites`.
    pub fn apply_channel(&self, sites: &[Site], ch: &KrausChannel) -> Result<Self> {
        let d = self.matrix.nrows();
        let mut out = DMatrix::zeros(d, d);
        for k in ch.operators() {
            let big = self.embed(sites, k)?;
            out += &big * &self.matrix * big.adjoint();
        }
        Ok(DensityOperator { labels: self.labels.clone(), matrix: out })
    }

    /// Lifts a local operator on `sites` to the full register.
    pub fn embed(&self, sites: &[Site], op: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        check_labels(sites)?;
        let pos: Vec<usize> = sites.iter().map(|&s| self.position(s)).collect::<Result<_>>()?;
        let k = pos.len();
        if op.nrows() != 1 << k {
            return Err(Error::DimensionMismatch("embedded operator".into()));
        }
        let d = self.matrix.nrows();
        let local = |idx: usize| -> usize { pos.iter().enumerate().map(|(j, p)| ((idx >> p) & 1) << j).sum() };
        let mask: usize = pos.iter().map(|p| 1 << p).sum();
        Ok(DMatrix::from_fn(d, d, |i, j| if i & !mask == j & !mask { op[(local(i), local(j))] } else { cr(0.0) }))
    }

    pub fn distance_max(&self, other: &DensityOperator) -> Result<f64> {
        let o = if other.labels == self.labels { other.clone() } else { other.permuted(&self.labels)? };
        Ok(max_abs(&(&self.matrix - &o.matrix)))
    }
}

/// Traces out `sites` of `rho`.
pub fn partial_trace(rho: &DensityOperator, sites: &[Site]) -> Result<DensityOperator> {
    rho.partial_trace(sites)
}

/// Entropy in bits; eigenvalues below 1e-12 are skipped.
pub fn von_neumann_entropy(rho: &DensityOperator) -> f64 {
    rho.von_neumann_entropy()
}

/// I(q; t) = S(q) + S(t) − S(qt) in bits.
pub fn mutual_information(rho: &DensityOperator, part_q: &[Site], part_t: &[Site]) -> Result<f64> {
    if part_q.iter().any(|s| part_t.contains(s)) {
        return Err(Error::InvalidState("parts overlap".into()));
    }
    if part_q.len() + part_t.len() != rho.num_qubits() {
        return Err(Error::InvalidState("parts must cover the operator".into()));
    }
    let sq = rho.reduced(part_q)?.von_neumann_entropy();
    let st = rho.reduced(part_t)?.von_neumann_entropy();
    Ok(sq + st - rho.von_neumann_entropy())
}

pub fn fidelity(rho: &DensityOperator, target: &PureState) -> Result<f64> {
    rho.fidelity(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{bell_state, phi_plus};
    use nalgebra::DVector;

    #[test]
    fn bell_marginal_is_mixed() {
        let rho = phi_plus(1, 2).to_density();
        let r = rho.partial_trace(&[2]).unwrap();
        assert!(max_abs(&(r.matrix() - DMatrix::identity(2, 2) * cr(0.5))) < 1e-12);
        assert!((r.von_neumann_entropy() - 1.0).abs() < 1e-12);
        assert!((mutual_information(&rho, &[1], &[2]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn w2_partial_trace() {
        let s = 1.0 / 2f64.sqrt();
        let w = PureState::new(vec![1, 2], DVector::from_vec(vec![cr(0.0), cr(s), cr(s), cr(0.0)])).unwrap();
        let r = w.to_density().partial_trace(&[1]).unwrap();
        assert!(max_abs(&(r.matrix() - DMatrix::identity(2, 2) * cr(0.5))) < 1e-12);
    }

    #[test]
    fn fidelity_examples() {
        let pp = phi_plus(1, 2);
        assert!((pp.to_density().fidelity(&pp).unwrap() - 1.0).abs() < 1e-12);
        let mixed = DensityOperator::maximally_mixed(vec![1, 2]).unwrap();
        assert!((mixed.fidelity(&pp).unwrap() - 0.25).abs() < 1e-12);
        let pm = bell_state(1, 2, false, true);
        assert!(pm.to_density().fidelity(&pp).unwrap().abs() < 1e-12);
    }

    #[test]
    fn entropy_of_diag() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![cr(0.125), cr(0.875)]));
        let r = DensityOperator::new(vec![1], m).unwrap();
        assert!((r.von_neumann_entropy() - 0.543_564_443_199_596).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(2, 2, &[cr(0.5), cr(0.3), cr(0.0), cr(0.5)]);
        assert!(matches!(DensityOperator::new(vec![1], m), Err(Error::InvalidState(_))));
    }

    #[test]
    fn unknown_site_is_rejected() {
        let rho = phi_plus(1, 2).to_density();
        assert_eq!(rho.partial_trace(&[5]), Err(Error::InvalidSite(5)));
    }
}
