use nalgebra::{DMatrix, Matrix2};

use super::Chain;
use crate::qcore::{check_labels, cr, mutual_information, DensityOperator, Site, C64};
use crate::{Error, Result};

/// How the left correlation boundary is prepared.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeftEnv {
    /// The chain's own boundary vector.
    Pure,
    /// I/2, i.e. the boundary entangled with a reference that is traced out.
    Mixed,
    /// (|Φ+⟩ reference, wire) with the reference kept under the given label.
    Aux(Site),
}

/// Reduced density operator of `sites` by environment contraction; cost is
/// linear in the wire length and exponential only in the number of kept sites.
/// Output labels are the aux (if any) followed by `sites` in the given order.
pub fn reduced_density_mpo(chain: &Chain, sites: &[Site], env: LeftEnv) -> Result<DensityOperator> {
    check_labels(sites)?;
    let n = chain.n;
    if let Some(&s) = sites.iter().find(|&&s| s == 0 || s > n) {
        return Err(Error::InvalidSite(s));
    }
    let mut sorted = sites.to_vec();
    sorted.sort_unstable();
    let mut labels = Vec::new();
    let (mut kdim, mut blocks): (usize, Vec<Matrix2<C64>>) = match env {
        LeftEnv::Pure => (1, vec![chain.left * chain.left.adjoint()]),
        LeftEnv::Mixed => (1, vec![Matrix2::identity() * cr(0.5)]),
        LeftEnv::Aux(label) => {
            if sites.contains(&label) {
                return Err(Error::DuplicateSite(label));
            }
            labels.push(label);
            let mut b = vec![Matrix2::zeros(); 4];
            for i in 0..2 {
                for j in 0..2 {
                    b[i + 2 * j][(i, j)] = cr(0.5);
                }
            }
            (2, b)
        }
    };
    let a = &chain.tensors.a;
    for s in 1..n {
        if sorted.binary_search(&s).is_ok() {
            let k2 = 2 * kdim;
            let mut next = vec![Matrix2::zeros(); k2 * k2];
            for r in 0..kdim {
                for col in 0..kdim {
                    let x = &blocks[r + kdim * col];
                    for b in 0..2 {
                        for bp in 0..2 {
                            next[(r + b * kdim) + k2 * (col + bp * kdim)] = a[b] * x * a[bp].adjoint();
                        }
                    }
                }
            }
            kdim = k2;
            blocks = next;
            labels.push(s);
        } else {
            for x in blocks.iter_mut() {
                *x = a[0] * *x * a[0].adjoint() + a[1] * *x * a[1].adjoint();
            }
        }
        let tr: C64 = (0..kdim).map(|r| blocks[r + kdim * r].trace()).sum();
        if tr.norm() < 1e-300 {
            return Err(Error::DegenerateWire);
        }
        for x in blocks.iter_mut() {
            *x /= tr;
        }
    }
    let rho = if sorted.last() == Some(&n) {
        labels.push(n);
        let k2 = 2 * kdim;
        DMatrix::from_fn(k2, k2, |i, j| blocks[(i % kdim) + kdim * (j % kdim)][(i / kdim, j / kdim)])
    } else {
        DMatrix::from_fn(kdim, kdim, |i, j| blocks[i + kdim * j].trace())
    };
    let rho = DensityOperator::new_unchecked(labels, rho)?;
    let mut order = match env {
        LeftEnv::Aux(l) => vec![l],
        _ => vec![],
    };
    order.extend_from_slice(sites);
    rho.permuted(&order)
}

/// Von Neumann entropy of one site of the logical Bell wire (reference traced out).
pub fn single_site_entropy(chain: &Chain, site: Site) -> Result<f64> {
    Ok(reduced_density_mpo(chain, &[site], LeftEnv::Mixed)?.von_neumann_entropy())
}

pub fn wire_entropy_profile(chain: &Chain, sites: &[Site]) -> Result<Vec<f64>> {
    sites.iter().map(|&s| single_site_entropy(chain, s)).collect()
}

/// I(reference : site) for the logical Bell wire with the reference on label 0.
pub fn wire_mutual_info(chain: &Chain, site: Site) -> Result<f64> {
    let rho = reduced_density_mpo(chain, &[site], LeftEnv::Aux(0))?;
    mutual_information(&rho, &[0], &[site])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::PeriodWire;
    use std::f64::consts::PI;

    #[test]
    fn matches_dense_reduction() {
        let w = PeriodWire::new(3, 2.0, 7).unwrap();
        let chain = w.chain();
        let dense = chain.state().unwrap();
        for sites in [vec![1], vec![3], vec![7], vec![2, 5], vec![6, 1, 7]] {
            let a = reduced_density_mpo(&chain, &sites, LeftEnv::Pure).unwrap();
            let b = dense.reduced(&sites).unwrap();
            assert!(a.distance_max(&b).unwrap() < 1e-12, "{sites:?}");
        }
        let bell = chain.logical_bell_state(0).unwrap();
        for sites in [vec![2], vec![7], vec![4, 7]] {
            let a = reduced_density_mpo(&chain, &sites, LeftEnv::Aux(0)).unwrap();
            let mut keep = vec![0];
            keep.extend_from_slice(&sites);
            let b = bell.reduced(&keep).unwrap();
            assert!(a.distance_max(&b).unwrap() < 1e-12, "{sites:?}");
            let m = reduced_density_mpo(&chain, &sites, LeftEnv::Mixed).unwrap();
            assert!(m.distance_max(&bell.reduced(&sites).unwrap()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn long_wire_is_cheap() {
        let w = PeriodWire::new(4, PI / 2.0, 5000).unwrap();
        let s = single_site_entropy(&w.chain(), 2500).unwrap();
        assert!(s > 0.0 && s <= 1.0 + 1e-12);
    }
}
