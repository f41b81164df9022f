//! Dicke-state codewords and their closed-form storage metrics.
//!
//! A logical qubit is stored as |0_L⟩ = |n,k1⟩, |1_L⟩ = |n,k2⟩. Closed forms
//! work in log space and are valid beyond the dense cap; every one of them has
//! a dense counterpart here (`*_oracle`) built only from qcore primitives.

use nalgebra::{DVector, Matrix2, Vector2};
use statrs::function::factorial::ln_binomial;

use crate::qcore::{
    check_cap, cr, h2, mutual_information, pauli, DensityOperator, PureState, Site, C64,
};
use crate::{Error, Result};

/// Label of the reference qubit that the block is entangled with.
pub const AUX: Site = 0;

fn ln_c(n: usize, k: usize) -> Option<f64> {
    (k <= n).then(|| ln_binomial(n as u64, k as u64))
}

/// C(a,b)·C(c,d)/C(e,f)-style ratio in log space; `None` if any binomial vanishes.
fn ratio(num: &[(usize, usize)], den: &[(usize, usize)]) -> Option<f64> {
    let mut acc = 0.0;
    for &(n, k) in num {
        acc += ln_c(n, k)?;
    }
    for &(n, k) in den {
        acc -= ln_c(n, k)?;
    }
    Some(acc.exp())
}

pub fn dicke_state_on(labels: Vec<Site>, k: usize) -> Result<PureState> {
    let n = labels.len();
    if k > n {
        return Err(Error::InvalidExcitation { n, k });
    }
    check_cap(n)?;
    let amps = DVector::from_fn(1 << n, |i, _| if (i as u64).count_ones() as usize == k { cr(1.0) } else { cr(0.0) });
    PureState::new(labels, amps)
}

/// |n,k⟩ on sites 1..=n.
pub fn dicke_state(n: usize, k: usize) -> Result<PureState> {
    dicke_state_on((1..=n).collect(), k)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DickeCode {
    pub n: usize,
    pub k1: usize,
    pub k2: usize,
}

impl DickeCode {
    pub fn new(n: usize, k1: usize, k2: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidCode("block size must be at least 1".into()));
        }
        for k in [k1, k2] {
            if k > n {
                return Err(Error::InvalidExcitation { n, k });
            }
        }
        if k1 >= k2 {
            return Err(Error::InvalidCode(format!("need k1 < k2, got ({k1}, {k2})")));
        }
        Ok(DickeCode { n, k1, k2 })
    }

    pub fn codewords(&self) -> Result<Codewords> {
        Codewords::new(dicke_state(self.n, self.k1)?, dicke_state(self.n, self.k2)?)
    }
}

/// An orthonormal codeword pair on a block of sites 1..=size.
#[derive(Clone, Debug)]
pub struct Codewords {
    pub zero: PureState,
    pub one: PureState,
}

impl Codewords {
    pub fn new(zero: PureState, one: PureState) -> Result<Self> {
        if zero.labels() != one.labels() {
            return Err(Error::InvalidCode("codewords live on different sites".into()));
        }
        if zero.inner(&one)?.norm() > 1e-10 {
            return Err(Error::InvalidCode("codewords are not orthogonal".into()));
        }
        Ok(Codewords { zero, one })
    }

    pub fn size(&self) -> usize {
        self.zero.num_qubits()
    }

    /// α|0_L⟩ + β|1_L⟩.
    pub fn encode(&self, v: &Vector2<C64>) -> Result<PureState> {
        let amps = self.zero.amplitudes() * v[0] + self.one.amplitudes() * v[1];
        PureState::new(self.zero.labels().to_vec(), amps)
    }

    /// (|0⟩_aux|0_L⟩ + |1⟩_aux|1_L⟩)/√2 with the reference on `aux`.
    pub fn bell_with(&self, aux: Site) -> Result<PureState> {
        let a0 = PureState::basis(vec![aux], &[0])?.tensor(&self.zero)?;
        let a1 = PureState::basis(vec![aux], &[1])?.tensor(&self.one)?;
        PureState::new(a0.labels().to_vec(), a0.amplitudes() + a1.amplitudes())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecompTerm {
    pub q: usize,
    pub coefficient: f64,
}

/// |n,k⟩ = Σ_q c_q |j,q⟩|n−j,k−q⟩.
pub fn dicke_decompose(n: usize, k: usize, j: usize) -> Result<Vec<DecompTerm>> {
    if k > n {
        return Err(Error::InvalidExcitation { n, k });
    }
    if j == 0 || j >= n {
        return Err(Error::EmptyDecomposition(format!("split {j} of a block of {n}")));
    }
    let lo = (j + k).saturating_sub(n);
    let hi = j.min(k);
    let terms: Vec<DecompTerm> = (lo..=hi)
        .filter_map(|q| ratio(&[(j, q), (n - j, k - q)], &[(n, k)]).map(|r| DecompTerm { q, coefficient: r.sqrt() }))
        .collect();
    if terms.is_empty() {
        return Err(Error::EmptyDecomposition(format!("({n},{k}) split at {j}")));
    }
    Ok(terms)
}

/// One term c |n_f,ket_k⟩⟨n_f,bra_k| of Tr_m |n,k1⟩⟨n,k2|.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceTerm {
    pub i: usize,
    pub n_f: usize,
    pub ket_k: usize,
    pub bra_k: usize,
    pub coefficient: f64,
}

fn cross(n: usize, m: usize, ka: usize, kb: usize, i: usize) -> f64 {
    let nf = n - m;
    if i > ka || i > kb || ka - i > nf || kb - i > nf || i > m {
        return 0.0;
    }
    let num = ln_c(m, i).unwrap() + 0.5 * (ln_c(nf, ka - i).unwrap() + ln_c(nf, kb - i).unwrap());
    let den = 0.5 * (ln_c(n, ka).unwrap() + ln_c(n, kb).unwrap());
    (num - den).exp()
}

/// Tr over m block qubits of |n,k1⟩⟨n,k2|.
pub fn trace_out_dicke(n: usize, k1: usize, k2: usize, m: usize) -> Result<Vec<TraceTerm>> {
    for k in [k1, k2] {
        if k > n {
            return Err(Error::InvalidExcitation { n, k });
        }
    }
    if m >= n {
        return Err(Error::InvalidTrace { n, m });
    }
    let nf = n - m;
    Ok((0..=m)
        .filter_map(|i| {
            let c = cross(n, m, k1, k2, i);
            (c > 0.0).then(|| TraceTerm { i, n_f: nf, ket_k: k1 - i, bra_k: k2 - i, coefficient: c })
        })
        .collect())
}

/// CJ fidelity of the Dicke logical Bell state after m losses.
///
/// The reference is the reduced codeword pair (|n−m,a⟩, |n−m,b⟩) that fits the
/// surviving state best; F = ¼[d₁ + d₂ + 2δ c₁₂] for the matching shifts.
pub fn cj_fidelity_closed(code: DickeCode, m: usize) -> Result<f64> {
    let DickeCode { n, k1, k2 } = code;
    if m >= n {
        return Err(Error::InvalidTrace { n, m });
    }
    let nf = n - m;
    let mut best = 0.0f64;
    for a in 0..=nf {
        for b in 0..=nf {
            if a == b {
                continue;
            }
            let d1 = if k1 >= a { cross(n, m, k1, k1, k1 - a) } else { 0.0 };
            let d2 = if k2 >= b { cross(n, m, k2, k2, k2 - b) } else { 0.0 };
            let c12 = if k1 >= a && k2 >= b && k1 - a == k2 - b { cross(n, m, k1, k2, k1 - a) } else { 0.0 };
            best = best.max(0.25 * (d1 + d2 + 2.0 * c12));
        }
    }
    Ok(best)
}

/// Dense counterpart of [`cj_fidelity_closed`]: builds the logical Bell state,
/// traces the last m block qubits and maximizes over dense reference pairs.
pub fn cj_fidelity_oracle(code: DickeCode, m: usize) -> Result<f64> {
    let DickeCode { n, .. } = code;
    if m >= n {
        return Err(Error::InvalidTrace { n, m });
    }
    let nf = n - m;
    let state = code.codewords()?.bell_with(AUX)?;
    let mut keep = vec![AUX];
    keep.extend(1..=nf);
    let gamma = state.reduced(&keep)?;
    let mut best = 0.0f64;
    for a in 0..=nf {
        for b in 0..=nf {
            if a == b {
                continue;
            }
            let reference = Codewords::new(dicke_state(nf, a)?, dicke_state(nf, b)?)?.bell_with(AUX)?;
            best = best.max(gamma.fidelity(&reference)?);
        }
    }
    Ok(best)
}

/// Single-particle entanglement entropy H₂((k1+k2)/2n) of the logical Bell state.
pub fn dicke_entropy(code: DickeCode) -> f64 {
    h2((code.k1 + code.k2) as f64 / (2.0 * code.n as f64))
}

/// Entropy of block site `site` in the dense logical Bell state.
pub fn dicke_entropy_oracle(code: DickeCode, site: Site) -> Result<f64> {
    let state = code.codewords()?.bell_with(AUX)?;
    Ok(state.reduced(&[site])?.von_neumann_entropy())
}

/// I(aux; parties) of the logical Bell state, parties ⊂ 1..=n.
pub fn dicke_mutual_info(code: DickeCode, parties: &[Site]) -> Result<f64> {
    if parties.is_empty() || parties.iter().any(|&s| s == 0 || s > code.n) {
        return Err(Error::InvalidState(format!("party set {parties:?} not inside the block")));
    }
    let state = code.codewords()?.bell_with(AUX)?;
    let mut keep = vec![AUX];
    keep.extend_from_slice(parties);
    let rho = state.reduced(&keep)?;
    mutual_information(&rho, &[AUX], parties)
}

/// N blocks of the base code's m-qubit Dicke states, combined GHZ-style.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConcatDickeCode {
    pub base: DickeCode,
    pub blocks: usize,
}

impl ConcatDickeCode {
    pub fn new(base: DickeCode, blocks: usize) -> Result<Self> {
        if blocks == 0 {
            return Err(Error::InvalidCode("at least one block".into()));
        }
        Ok(ConcatDickeCode { base, blocks })
    }

    pub fn total_qubits(&self) -> usize {
        self.base.n * self.blocks
    }
}

/// |0_L⟩,|1_L⟩ = [(|0̃⟩+|1̃⟩)^⊗N ± (|0̃⟩−|1̃⟩)^⊗N]/√2, normalized.
pub fn concat_codewords(cfg: ConcatDickeCode) -> Result<(PureState, PureState)> {
    check_cap(cfg.total_qubits())?;
    let m = cfg.base.n;
    let z = dicke_state(m, cfg.base.k1)?;
    let o = dicke_state(m, cfg.base.k2)?;
    let plus = PureState::new(z.labels().to_vec(), z.amplitudes() + o.amplitudes())?;
    let minus = PureState::new(z.labels().to_vec(), z.amplitudes() - o.amplitudes())?;
    let power = |s: &PureState| -> Result<PureState> {
        let mut acc = s.clone();
        for b in 1..cfg.blocks {
            let shifted = s.relabel(((b * m + 1)..=((b + 1) * m)).collect())?;
            acc = acc.tensor(&shifted)?;
        }
        Ok(acc)
    };
    let p = power(&plus)?;
    let q = power(&minus)?;
    let labels = p.labels().to_vec();
    Ok((
        PureState::new(labels.clone(), p.amplitudes() + q.amplitudes())?,
        PureState::new(labels, p.amplitudes() - q.amplitudes())?,
    ))
}

/// Single-loss CJ fidelity of concatenated codewords, with each lost qubit
/// replaced by I/2.
pub fn concat_cj_fidelity(cfg: ConcatDickeCode, m: usize) -> Result<f64> {
    let (z, o) = concat_codewords(cfg)?;
    let n = cfg.total_qubits();
    if m >= n {
        return Err(Error::InvalidTrace { n, m });
    }
    let cw = Codewords::new(z, o)?;
    let state = cw.bell_with(AUX)?;
    let lost: Vec<Site> = ((n - m + 1)..=n).collect();
    let gamma = state.to_density().partial_trace(&lost)?;
    let mut labels = gamma.labels().to_vec();
    labels.extend_from_slice(&lost);
    let mixed = DensityOperator::maximally_mixed(lost)?;
    let rho = DensityOperator::new(labels, mixed.matrix().kronecker(gamma.matrix()))?;
    rho.fidelity(&state)
}

/// Graph-state codewords |G⟩ and Z^⊗n|G⟩ on sites 1..=n.
pub fn graph_codewords(edges: &[(Site, Site)], n: usize) -> Result<(PureState, PureState)> {
    validate_graph(edges, n)?;
    check_cap(n)?;
    let amps = DVector::from_fn(1 << n, |idx, _| {
        let bit = |s: Site| (idx >> (s - 1)) & 1;
        let parity = edges.iter().filter(|&&(a, b)| bit(a) & bit(b) == 1).count() % 2;
        cr(if parity == 1 { -1.0 } else { 1.0 })
    });
    let g = PureState::new((1..=n).collect(), amps)?;
    let one = DVector::from_fn(1 << n, |idx, _| {
        let sign = if (idx as u64).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        g.amplitudes()[idx] * sign
    });
    let o = PureState::new(g.labels().to_vec(), one)?;
    Ok((g, o))
}

pub(crate) fn validate_graph(edges: &[(Site, Site)], n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidGraph("empty vertex set".into()));
    }
    for &(a, b) in edges {
        if a == b || a == 0 || b == 0 || a > n || b > n {
            return Err(Error::InvalidGraph(format!("bad edge ({a}, {b})")));
        }
    }
    let mut seen = vec![false; n + 1];
    let mut stack = vec![1];
    seen[1] = true;
    while let Some(v) = stack.pop() {
        for &(a, b) in edges {
            for (x, y) in [(a, b), (b, a)] {
                if x == v && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
    }
    if seen[1..].iter().any(|s| !s) {
        return Err(Error::InvalidGraph("graph is not connected".into()));
    }
    Ok(())
}

/// One branch of the Z-basis download from graph codewords.
#[derive(Clone, Debug)]
pub struct GraphDownloadBranch {
    pub outcomes: Vec<u8>,
    pub probability: f64,
    pub correction: Matrix2<C64>,
    /// Target qubit after the correction.
    pub state: PureState,
}

/// Encodes `payload`, measures every vertex except `target` in Z and corrects
/// the target. Every branch carries the payload.
pub fn graph_z_download(
    edges: &[(Site, Site)],
    n: usize,
    target: Site,
    payload: &Vector2<C64>,
) -> Result<Vec<GraphDownloadBranch>> {
    let (g0, g1) = graph_codewords(edges, n)?;
    if target == 0 || target > n {
        return Err(Error::InvalidSite(target));
    }
    let encoded = Codewords::new(g0, g1)?.encode(payload)?;
    let others: Vec<Site> = (1..=n).filter(|&s| s != target).collect();
    let mut out = Vec::new();
    for bits in 0..1usize << others.len() {
        let mut v = DVector::zeros(1 << others.len());
        v[bits] = cr(1.0);
        let (p, post) = encoded.project_out(&others, &v)?;
        let Some(post) = post else { continue };
        let outcomes: Vec<u8> = (0..others.len()).map(|j| ((bits >> j) & 1) as u8).collect();
        let nb = others
            .iter()
            .zip(&outcomes)
            .filter(|(s, &o)| o == 1 && edges.iter().any(|&(a, b)| (a == target && b == **s) || (b == target && a == **s)))
            .count();
        let weight = outcomes.iter().filter(|&&o| o == 1).count();
        let mut corr = pauli::h();
        if weight % 2 == 1 {
            corr = pauli::z() * corr;
        }
        if nb % 2 == 1 {
            corr *= pauli::z();
        }
        let corrected = post.apply_1q(target, &corr.adjoint())?;
        out.push(GraphDownloadBranch { outcomes, probability: p, correction: corr, state: corrected });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::c;

    #[test]
    fn small_dicke_states() {
        let w = dicke_state(2, 1).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((w.amplitudes()[1].re - s).abs() < 1e-12 && (w.amplitudes()[2].re - s).abs() < 1e-12);
        let d = dicke_state(4, 2).unwrap();
        assert_eq!(d.amplitudes().iter().filter(|a| a.norm() > 0.0).count(), 6);
        assert!(matches!(dicke_state(3, 4), Err(Error::InvalidExcitation { .. })));
    }

    #[test]
    fn decomposition_examples() {
        let t = dicke_decompose(4, 2, 2).unwrap();
        let want: [f64; 3] = [1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0];
        for (term, w) in t.iter().zip(want) {
            assert!((term.coefficient - w.sqrt()).abs() < 1e-12);
        }
        let t = dicke_decompose(5, 0, 2).unwrap();
        assert_eq!(t.len(), 1);
        assert!((t[0].coefficient - 1.0).abs() < 1e-12);
        assert!(matches!(dicke_decompose(4, 1, 0), Err(Error::EmptyDecomposition(_))));
    }

    #[test]
    fn trace_out_examples() {
        let t = trace_out_dicke(2, 1, 1, 1).unwrap();
        assert_eq!(t.len(), 2);
        assert!(t.iter().all(|x| (x.coefficient - 0.5).abs() < 1e-12));
        for n in 4..=8 {
            let t = trace_out_dicke(n, 0, 1, 1).unwrap();
            let off = t.iter().find(|x| x.i == 0).unwrap();
            assert!((off.coefficient - ((n - 1) as f64 / n as f64).sqrt()).abs() < 1e-12);
        }
        assert!(matches!(trace_out_dicke(3, 0, 1, 3), Err(Error::InvalidTrace { .. })));
    }

    #[test]
    fn cj_spot_values() {
        let c = DickeCode::new(10, 0, 1).unwrap();
        let want = (1.0 + 0.9f64.sqrt()).powi(2) / 4.0;
        assert!((cj_fidelity_closed(c, 1).unwrap() - want).abs() < 1e-12);
        assert!((cj_fidelity_closed(c, 0).unwrap() - 1.0).abs() < 1e-12);
        let ghz = DickeCode::new(6, 0, 6).unwrap();
        assert!((cj_fidelity_closed(ghz, 1).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn entropy_spot() {
        let c = DickeCode::new(4, 0, 1).unwrap();
        assert!((dicke_entropy(c) - 0.543_564_443_199_596).abs() < 1e-12);
        assert!((dicke_entropy_oracle(c, 2).unwrap() - dicke_entropy(c)).abs() < 1e-10);
    }

    #[test]
    fn concat_smallest_case() {
        let cfg = ConcatDickeCode::new(DickeCode::new(1, 0, 1).unwrap(), 2).unwrap();
        let (z, o) = concat_codewords(cfg).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((z.amplitudes()[0].re - s).abs() < 1e-12 && (z.amplitudes()[3].re - s).abs() < 1e-12);
        assert!((o.amplitudes()[1].re - s).abs() < 1e-12 && (o.amplitudes()[2].re - s).abs() < 1e-12);
    }

    #[test]
    fn two_vertex_graph() {
        let (g, o) = graph_codewords(&[(1, 2)], 2).unwrap();
        let want = [0.5, 0.5, 0.5, -0.5];
        for (a, w) in g.amplitudes().iter().zip(want) {
            assert!((a.re - w).abs() < 1e-12);
        }
        assert!(g.inner(&o).unwrap().norm() < 1e-12);
        assert!(matches!(graph_codewords(&[(1, 2)], 3), Err(Error::InvalidGraph(_))));
    }

    #[test]
    fn graph_download_is_deterministic() {
        let payload = Vector2::new(c(0.3, 0.4), c(-0.5, 0.7)).normalize();
        let edges = [(1, 2), (2, 3), (3, 4), (1, 3)];
        let expect = PureState::product(vec![3], &[payload]).unwrap();
        let branches = graph_z_download(&edges, 4, 3, &payload).unwrap();
        let total: f64 = branches.iter().map(|b| b.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for b in branches {
            assert!((b.state.fidelity(&expect).unwrap() - 1.0).abs() < 1e-10);
        }
    }
}
