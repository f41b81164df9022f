use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use super::{check_cap, cr, DensityOperator, Site, C64, TOL};
use crate::{Error, Result};

/// Normalized pure state over labeled qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    labels: Vec<Site>,
    amps: DVector<C64>,
}

pub(crate) fn check_labels(labels: &[Site]) -> Result<()> {
    for (i, a) in labels.iter().enumerate() {
        if labels[..i].contains(a) {
            return Err(Error::DuplicateSite(*a));
        }
    }
    Ok(())
}

impl PureState {
    /// Builds a state and normalizes it.
    pub fn new(labels: Vec<Site>, amps: DVector<C64>) -> Result<Self> {
        check_labels(&labels)?;
        check_cap(labels.len())?;
        if amps.len() != 1usize << labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for {} qubits",
                amps.len(),
                labels.len()
            )));
        }
        let norm = amps.norm();
        if !(norm > 1e-12) || !norm.is_finite() {
            return Err(Error::InvalidState("vanishing norm".into()));
        }
        Ok(PureState { labels, amps: amps / cr(norm) })
    }

    pub fn basis(labels: Vec<Site>, bits: &[u8]) -> Result<Self> {
        if bits.len() != labels.len() {
            return Err(Error::DimensionMismatch("bit string length".into()));
        }
        let idx = bits.iter().enumerate().fold(0usize, |acc, (i, &b)| acc | ((b as usize & 1) << i));
        let mut amps = DVector::zeros(1 << labels.len());
        amps[idx] = cr(1.0);
        PureState::new(labels, amps)
    }

    pub fn product(labels: Vec<Site>, factors: &[Vector2<C64>]) -> Result<Self> {
        if factors.len() != labels.len() {
            return Err(Error::DimensionMismatch("one factor per label".into()));
        }
        check_cap(labels.len())?;
        let n = labels.len();
        let amps = DVector::from_fn(1 << n, |idx, _| {
            (0..n).fold(cr(1.0), |acc, i| acc * factors[i][(idx >> i) & 1])
        });
        PureState::new(labels, amps)
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[Site] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn position(&self, site: Site) -> Result<usize> {
        self.labels.iter().position(|&l| l == site).ok_or(Error::InvalidSite(site))
    }

    pub fn contains(&self, site: Site) -> bool {
        self.labels.contains(&site)
    }

    /// `self ⊗ other`, with `other` on the higher bits.
    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        check_labels(&labels)?;
        check_cap(labels.len())?;
        let lo = self.amps.len();
        let amps = DVector::from_fn(lo * other.amps.len(), |i, _| self.amps[i % lo] * other.amps[i / lo]);
        PureState::new(labels, amps)
    }

    pub fn relabel(&self, labels: Vec<Site>) -> Result<PureState> {
        if labels.len() != self.labels.len() {
            return Err(Error::DimensionMismatch("relabel length".into()));
        }
        check_labels(&labels)?;
        Ok(PureState { labels, amps: self.amps.clone() })
    }

    /// Same state with qubits reordered so that `order[i]` sits on bit i.
    pub fn permuted(&self, order: &[Site]) -> Result<PureState> {
        if order.len() != self.labels.len() {
            return Err(Error::DimensionMismatch("permutation length".into()));
        }
        let pos: Vec<usize> = order.iter().map(|&s| self.position(s)).collect::<Result<_>>()?;
        check_labels(order)?;
        let n = order.len();
        let amps = DVector::from_fn(self.amps.len(), |idx, _| {
            let mut src = 0usize;
            for (i, &p) in pos.iter().enumerate().take(n) {
                src |= ((idx >> i) & 1) << p;
            }
            self.amps[src]
        });
        Ok(PureState { labels: order.to_vec(), amps })
    }

    /// ⟨self|other⟩ after aligning label order.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        let o = if other.labels == self.labels { other.clone() } else { other.permuted(&self.labels)? };
        Ok(self.amps.dotc(&o.amps))
    }

    pub fn fidelity(&self, other: &PureState) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    fn positions(&self, sites: &[Site]) -> Result<Vec<usize>> {
        check_labels(sites)?;
        sites.iter().map(|&s| self.position(s)).collect()
    }

    /// Applies a 2^k × 2^k operator to `sites` (first listed = low local bit).
    /// Non-unitary operators leave the result unnormalized; use
    /// [`PureState::apply_operator`] for those.
    fn apply_raw(&self, sites: &[Site], op: &DMatrix<C64>) -> Result<DVector<C64>> {
        let pos = self.positions(sites)?;
        let k = pos.len();
        if op.nrows() != 1 << k || op.ncols() != 1 << k {
            return Err(Error::DimensionMismatch(format!("operator on {k} qubits")));
        }
        let mask: usize = pos.iter().map(|p| 1 << p).sum();
        let offsets: Vec<usize> = (0..1usize << k)
            .map(|l| pos.iter().enumerate().map(|(j, p)| ((l >> j) & 1) << p).sum())
            .collect();
        let mut out = self.amps.clone();
        let mut buf = vec![cr(0.0); 1 << k];
        for base in (0..self.amps.len()).filter(|i| i & mask == 0) {
            for (l, off) in offsets.iter().enumerate() {
                buf[l] = self.amps[base | off];
            }
            for (r, off) in offsets.iter().enumerate() {
                let mut acc = cr(0.0);
                for (l, b) in buf.iter().enumerate() {
                    acc += op[(r, l)] * b;
                }
                out[base | off] = acc;
            }
        }
        Ok(out)
    }

    pub fn apply_unitary(&self, sites: &[Site], u: &DMatrix<C64>) -> Result<PureState> {
        if !super::is_unitary(u, TOL) {
            return Err(Error::InvalidState("operator is not unitary".into()));
        }
        let amps = self.apply_raw(sites, u)?;
        PureState::new(self.labels.clone(), amps)
    }

    pub fn apply_1q(&self, site: Site, u: &Matrix2<C64>) -> Result<PureState> {
        self.apply_unitary(&[site], &super::to_dmatrix(u))
    }

    /// Applies a general operator and renormalizes; returns the squared norm
    /// of the unnormalized image alongside (None when it vanishes).
    pub fn apply_operator(&self, sites: &[Site], op: &DMatrix<C64>) -> Result<(f64, Option<PureState>)> {
        let amps = self.apply_raw(sites, op)?;
        let p = amps.norm_squared();
        if p < 1e-28 {
            return Ok((p, None));
        }
        Ok((p, Some(PureState::new(self.labels.clone(), amps)?)))
    }

    /// Projects `sites` onto `v` (a 2^k vector, first listed site = low bit)
    /// and removes them. Returns the probability and the normalized remainder.
    pub fn project_out(&self, sites: &[Site], v: &DVector<C64>) -> Result<(f64, Option<PureState>)> {
        let pos = self.positions(sites)?;
        let k = pos.len();
        if v.len() != 1 << k {
            return Err(Error::DimensionMismatch("projection vector".into()));
        }
        let rest: Vec<usize> = (0..self.labels.len()).filter(|i| !pos.contains(i)).collect();
        let labels: Vec<Site> = rest.iter().map(|&i| self.labels[i]).collect();
        let offsets: Vec<usize> = (0..1usize << k)
            .map(|l| pos.iter().enumerate().map(|(j, p)| ((l >> j) & 1) << p).sum())
            .collect();
        let mut amps = DVector::zeros(1 << rest.len());
        for r in 0..amps.len() {
            let base: usize = rest.iter().enumerate().map(|(j, p)| ((r >> j) & 1) << p).sum();
            let mut acc = cr(0.0);
            for (l, off) in offsets.iter().enumerate() {
                acc += v[l].conj() * self.amps[base | off];
            }
            amps[r] = acc;
        }
        let p = amps.norm_squared();
        if labels.is_empty() {
            return Ok((p, None));
        }
        if p < 1e-28 {
            return Ok((p, None));
        }
        Ok((p, Some(PureState::new(labels, amps)?)))
    }

    pub fn project_site(&self, site: Site, v: &Vector2<C64>) -> Result<(f64, Option<PureState>)> {
        self.project_out(&[site], &DVector::from_column_slice(v.as_slice()))
    }

    /// Reduced density operator on `keep` (in that label order).
    pub fn reduced(&self, keep: &[Site]) -> Result<DensityOperator> {
        let pos = self.positions(keep)?;
        let k = pos.len();
        let rest: Vec<usize> = (0..self.labels.len()).filter(|i| !pos.contains(i)).collect();
        let mut m = DMatrix::zeros(1 << k, 1 << rest.len());
        for idx in 0..self.amps.len() {
            let a: usize = pos.iter().enumerate().map(|(j, p)| ((idx >> p) & 1) << j).sum();
            let b: usize = rest.iter().enumerate().map(|(j, p)| ((idx >> p) & 1) << j).sum();
            m[(a, b)] = self.amps[idx];
        }
        DensityOperator::new_unchecked(keep.to_vec(), &m * m.adjoint())
    }

    pub fn to_density(&self) -> DensityOperator {
        let m = &self.amps * self.amps.adjoint();
        DensityOperator::new_unchecked(self.labels.clone(), m).expect("pure state density")
    }

    /// Equality up to a global phase.
    pub fn approx_eq_phase(&self, other: &PureState, tol: f64) -> bool {
        match self.inner(other) {
            Ok(o) => (1.0 - o.norm()).abs() < tol,
            Err(_) => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{ket_plus, pauli};

    #[test]
    fn least_significant_bit_is_first_label() {
        let s = PureState::basis(vec![1, 2, 3], &[1, 0, 0]).unwrap();
        assert_eq!(s.amplitudes()[1], cr(1.0));
    }

    #[test]
    fn permutation_round_trip() {
        let s = PureState::product(
            vec![1, 2, 3],
            &[ket_plus(), Vector2::new(cr(0.6), cr(0.8)), Vector2::new(cr(1.0), cr(0.0))],
        )
        .unwrap();
        let p = s.permuted(&[3, 1, 2]).unwrap();
        assert!((s.inner(&p).unwrap().norm() - 1.0).abs() < 1e-12);
        assert!((p.permuted(&[1, 2, 3]).unwrap().amplitudes() - s.amplitudes()).norm() < 1e-14);
    }

    #[test]
    fn projecting_removes_the_site() {
        let s = PureState::product(vec![1, 2], &[ket_plus(), Vector2::new(cr(0.6), cr(0.8))]).unwrap();
        let (p, rest) = s.project_site(1, &Vector2::new(cr(1.0), cr(0.0))).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        let rest = rest.unwrap();
        assert_eq!(rest.labels(), &[2]);
        assert!((rest.amplitudes()[1] - cr(0.8)).norm() < 1e-12);
    }

    #[test]
    fn unitary_on_high_bit() {
        let s = PureState::basis(vec![4, 7], &[0, 0]).unwrap();
        let t = s.apply_1q(7, &pauli::x()).unwrap();
        assert_eq!(t.amplitudes()[2], cr(1.0));
    }
}
