use nalgebra::{DMatrix, SymmetricEigen};

use super::{cr, max_abs, phi_plus, DensityOperator, PureState, C64, TOL};
use crate::{Error, Result};

/// Completely positive trace-preserving map in Kraus form.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    ops: Vec<DMatrix<C64>>,
}

impl KrausChannel {
    /// Validates Σ K†K = I within 1e-10.
    pub fn new(ops: Vec<DMatrix<C64>>) -> Result<Self> {
        let d = ops.first().map(|k| k.nrows()).ok_or_else(|| Error::InvalidState("no Kraus operators".into()))?;
        if ops.iter().any(|k| k.nrows() != d || k.ncols() != d) {
            return Err(Error::DimensionMismatch("Kraus operators differ in shape".into()));
        }
        let sum = ops.iter().fold(DMatrix::zeros(d, d), |acc, k| acc + k.adjoint() * k);
        let dev = max_abs(&(sum - DMatrix::identity(d, d)));
        if dev > TOL {
            return Err(Error::InvalidState(format!("Kraus operators not complete (deviation {dev:e})")));
        }
        Ok(KrausChannel { ops })
    }

    pub fn identity(qubits: usize) -> Self {
        let d = 1 << qubits;
        KrausChannel { ops: vec![DMatrix::identity(d, d)] }
    }

    /// ρ ↦ (1−q)ρ + q ZρZ.
    pub fn phase_flip(q: f64) -> Result<Self> {
        let z = DMatrix::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(-1.0)]);
        Self::new(vec![DMatrix::identity(2, 2) * cr((1.0 - q).sqrt()), z * cr(q.sqrt())])
    }

    pub fn operators(&self) -> &[DMatrix<C64>] {
        &self.ops
    }

    pub fn rank(&self) -> usize {
        self.ops.len()
    }

    /// Conjugates every Kraus operator by `u`: K ↦ u K u†.
    pub fn conjugated(&self, u: &DMatrix<C64>) -> Self {
        KrausChannel { ops: self.ops.iter().map(|k| u * k * u.adjoint()).collect() }
    }

    /// Choi state (I ⊗ E)(|Φ+⟩⟨Φ+|) of a single-qubit channel, labels (0, 1).
    pub fn choi(&self) -> Result<DensityOperator> {
        if self.ops[0].nrows() != 2 {
            return Err(Error::DimensionMismatch("Choi state only for single-qubit channels".into()));
        }
        let rho = phi_plus(0, 1).to_density();
        rho.apply_channel(&[1], self)
    }
}

/// Kraus decomposition extracted from a Choi-type image.
#[derive(Clone, Debug)]
pub struct KrausMap {
    pub channel: KrausChannel,
    pub rank: usize,
    /// Eigenvalues mᵢ of the output, descending.
    pub weights: Vec<f64>,
}

/// Reads a single-qubit channel off its action on |Φ+⟩.
///
/// `output` is (I ⊗ E)(|Φ+⟩⟨Φ+|) with the channel on the second label;
/// each eigenpair (mᵢ, |mᵢ⟩) gives Kᵢ with (I ⊗ Kᵢ)|Φ+⟩ = √mᵢ|mᵢ⟩.
pub fn kraus_from_map(input: &PureState, output: &DensityOperator) -> Result<KrausMap> {
    if input.num_qubits() != 2 || output.num_qubits() != 2 {
        return Err(Error::DimensionMismatch("kraus_from_map works on two qubits".into()));
    }
    let labels = input.labels().to_vec();
    let reference = phi_plus(labels[0], labels[1]);
    if (reference.fidelity(input)? - 1.0).abs() > TOL {
        return Err(Error::InvalidState("input must be |Φ+⟩".into()));
    }
    let out = DensityOperator::new(output.labels().to_vec(), output.matrix().clone())?.permuted(&labels)?;
    let h = (out.matrix() + out.matrix().adjoint()) * cr(0.5);
    let eig = SymmetricEigen::new(h);
    let mut pairs: Vec<(f64, usize)> = eig.eigenvalues.iter().copied().zip(0..).collect();
    if pairs.iter().any(|(l, _)| *l < -TOL) {
        return Err(Error::InvalidState("output is not positive semidefinite".into()));
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut ops = Vec::new();
    let mut weights = Vec::new();
    for (m, col) in pairs {
        if m <= 1e-12 {
            continue;
        }
        let v = eig.eigenvectors.column(col);
        let k = DMatrix::from_fn(2, 2, |row, j| v[j + 2 * row] * cr((2.0 * m).sqrt()));
        ops.push(k);
        weights.push(m);
    }
    let channel = KrausChannel::new(ops)
        .map_err(|_| Error::InvalidState("output marginal on the reference is not I/2".into()))?;
    Ok(KrausMap { rank: channel.rank(), channel, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::bell_state;

    #[test]
    fn identity_map_has_one_kraus() {
        let pp = phi_plus(0, 1);
        let k = kraus_from_map(&pp, &pp.to_density()).unwrap();
        assert_eq!(k.rank, 1);
        let op = &k.channel.operators()[0];
        let phase = op[(0, 0)];
        assert!(max_abs(&(op - DMatrix::identity(2, 2) * phase)) < 1e-12);
        assert!((phase.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_phase_flip() {
        let pp = phi_plus(0, 1);
        let pm = bell_state(0, 1, false, true);
        let out = DensityOperator::mixture(&[(0.5, pp.to_density()), (0.5, pm.to_density())]).unwrap();
        let k = kraus_from_map(&pp, &out).unwrap();
        assert_eq!(k.rank, 2);
        let choi = k.channel.choi().unwrap();
        let expect = KrausChannel::phase_flip(0.5).unwrap().choi().unwrap();
        assert!(choi.distance_max(&expect).unwrap() < 1e-12);
    }

    #[test]
    fn reconstruction_reproduces_output() {
        let pp = phi_plus(0, 1);
        let ch = KrausChannel::phase_flip(0.2).unwrap();
        let out = ch.choi().unwrap();
        let k = kraus_from_map(&pp, &out).unwrap();
        assert!(k.channel.choi().unwrap().distance_max(&out).unwrap() < 1e-12);
    }

    #[test]
    fn incomplete_kraus_rejected() {
        let half = DMatrix::identity(2, 2) * cr(0.5);
        assert!(KrausChannel::new(vec![half]).is_err());
    }
}
