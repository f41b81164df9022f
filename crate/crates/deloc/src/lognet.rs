//! Small networks of encoded qubits.
//!
//! Each region is one block of an encoding; a logical resource (GHZ, cluster
//! or graph state over the regions) is built by encoding every logical basis
//! string. Logical measurements are joint projections on a region's codespace.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::dicke::{concat_codewords, graph_codewords, validate_graph, Codewords, ConcatDickeCode, DickeCode};
use crate::protocols::{equalizing_filter, run_procedure, unitary_part, Action, Finish, Procedure, ProtocolRun, RunMode};
use crate::qcore::{c, check_cap, cr, pauli, to_dmatrix, PureState, Site, C64};
use crate::{Error, Result};

/// Codeword pair used for every region.
#[derive(Clone, Debug)]
pub enum Encoding {
    Dicke(DickeCode),
    Concat(ConcatDickeCode),
    /// Graph state |G⟩ and Z^⊗n|G⟩ on vertices 1..=n.
    Graph { edges: Vec<(Site, Site)>, n: usize },
    /// |0…0⟩ and |1…1⟩ on n qubits.
    Ghz(usize),
}

impl Encoding {
    /// Codewords on sites 1..=size.
    pub fn codewords(&self) -> Result<Codewords> {
        match self {
            Encoding::Dicke(code) => code.codewords(),
            Encoding::Concat(cfg) => {
                let (z, o) = concat_codewords(*cfg)?;
                Codewords::new(z, o)
            }
            Encoding::Graph { edges, n } => {
                let (z, o) = graph_codewords(edges, *n)?;
                Codewords::new(z, o)
            }
            Encoding::Ghz(n) => {
                if *n == 0 {
                    return Err(Error::InvalidCode("block size must be at least 1".into()));
                }
                let labels: Vec<Site> = (1..=*n).collect();
                Codewords::new(PureState::basis(labels.clone(), &vec![0; *n])?, PureState::basis(labels, &vec![1; *n])?)
            }
        }
    }
}

/// Logical-level state over the regions.
#[derive(Clone, Debug, PartialEq)]
pub enum LogicalResource {
    Ghz,
    /// Linear cluster over the regions in order.
    Cluster,
    /// Graph state; vertices are region indices 0..regions.
    Graph(Vec<(usize, usize)>),
}

#[derive(Clone, Debug)]
pub struct NetworkSpec {
    pub encoding: Encoding,
    pub resource: LogicalResource,
    pub regions: usize,
    /// Local dimension of the logical systems; only 2 is supported.
    pub levels: usize,
}

#[derive(Clone, Debug)]
pub struct LogicalNetwork {
    codewords: Codewords,
    regions: Vec<Vec<Site>>,
    resource: LogicalResource,
}

const MAX_GRAPH_REGIONS: usize = 4;
const MAX_GRAPH_BLOCK: usize = 4;

impl LogicalNetwork {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        if spec.levels != 2 {
            return Err(Error::InvalidCode(format!("{}-level logical systems are not supported", spec.levels)));
        }
        if spec.regions == 0 {
            return Err(Error::InvalidCode("at least one region".into()));
        }
        let codewords = spec.encoding.codewords()?;
        let size = codewords.size();
        check_cap(size * spec.regions)?;
        match &spec.resource {
            LogicalResource::Ghz => {}
            LogicalResource::Cluster | LogicalResource::Graph(_) => {
                if spec.regions > MAX_GRAPH_REGIONS || size > MAX_GRAPH_BLOCK {
                    return Err(Error::InvalidCode(format!(
                        "logical graph states need at most {MAX_GRAPH_REGIONS} regions of at most {MAX_GRAPH_BLOCK} qubits"
                    )));
                }
            }
        }
        if let LogicalResource::Graph(edges) = &spec.resource {
            let shifted: Vec<(Site, Site)> = edges.iter().map(|&(a, b)| (a + 1, b + 1)).collect();
            validate_graph(&shifted, spec.regions)?;
        }
        let regions = (0..spec.regions).map(|r| (r * size + 1..=(r + 1) * size).collect()).collect();
        Ok(LogicalNetwork { codewords, regions, resource: spec.resource })
    }

    pub fn regions(&self) -> &[Vec<Site>] {
        &self.regions
    }

    pub fn codewords(&self) -> &Codewords {
        &self.codewords
    }

    fn region(&self, r: usize) -> Result<&[Site]> {
        self.regions.get(r).map(|v| v.as_slice()).ok_or_else(|| Error::InvalidParameter(format!("no region {r}")))
    }

    /// Logical amplitudes of the resource, region 0 on the low bit.
    fn logical_amplitudes(&self) -> DVector<C64> {
        let r = self.regions.len();
        let edges: Vec<(usize, usize)> = match &self.resource {
            LogicalResource::Ghz => {
                let s = cr(1.0 / 2f64.sqrt());
                let mut v = DVector::zeros(1 << r);
                v[0] = s;
                v[(1 << r) - 1] = s;
                return v;
            }
            LogicalResource::Cluster => (1..r).map(|i| (i - 1, i)).collect(),
            LogicalResource::Graph(e) => e.clone(),
        };
        let s = 1.0 / ((1usize << r) as f64).sqrt();
        DVector::from_fn(1 << r, |idx, _| {
            let parity = edges.iter().filter(|&&(a, b)| (idx >> a) & (idx >> b) & 1 == 1).count() % 2;
            cr(if parity == 1 { -s } else { s })
        })
    }

    /// Σ_x c_x ⊗_r |x_r⟩_L over the regions present in `regions`.
    pub fn encode(&self, logical: &DVector<C64>, regions: &[usize]) -> Result<PureState> {
        if logical.len() != 1 << regions.len() {
            return Err(Error::DimensionMismatch("one logical amplitude per basis string".into()));
        }
        let mut labels = Vec::new();
        for &r in regions {
            labels.extend_from_slice(self.region(r)?);
        }
        check_cap(labels.len())?;
        let size = self.codewords.size();
        let words = [self.codewords.zero.amplitudes(), self.codewords.one.amplitudes()];
        let mut amps = DVector::zeros(1 << labels.len());
        for (x, cx) in logical.iter().enumerate() {
            if cx.norm() < 1e-15 {
                continue;
            }
            let mut v = DVector::from_element(1, *cx);
            for j in 0..regions.len() {
                let w = words[(x >> j) & 1];
                let lo = v.len();
                v = DVector::from_fn(lo * w.len(), |i, _| v[i % lo] * w[i / lo]);
            }
            amps += v;
        }
        debug_assert_eq!(amps.len(), 1 << (size * regions.len()));
        PureState::new(labels, amps)
    }

    /// Physical state of the logical resource.
    pub fn build_logical_resource(&self) -> Result<PureState> {
        let all: Vec<usize> = (0..self.regions.len()).collect();
        self.encode(&self.logical_amplitudes(), &all)
    }

    /// Physical state of an arbitrary logical state on the given regions.
    pub fn encode_logical_state(&self, logical: &PureState) -> Result<PureState> {
        let regions: Vec<usize> = logical.labels().to_vec();
        self.encode(logical.amplitudes(), &regions)
    }

    /// Codespace isometry of one region applied to a logical vector.
    fn encoded_vector(&self, r: usize, v: &Vector2<C64>) -> Result<DVector<C64>> {
        self.region(r)?;
        Ok(self.codewords.zero.amplitudes() * v[0] + self.codewords.one.amplitudes() * v[1])
    }

    /// Physical operator U_L ⊕ (I − P_code) on a region.
    pub fn logical_operator(&self, u: &Matrix2<C64>) -> DMatrix<C64> {
        let z = self.codewords.zero.amplitudes();
        let o = self.codewords.one.amplitudes();
        let d = z.len();
        let words = [z, o];
        let mut m = DMatrix::identity(d, d) - z * z.adjoint() - o * o.adjoint();
        for i in 0..2 {
            for j in 0..2 {
                m += words[i] * words[j].adjoint() * u[(i, j)];
            }
        }
        m
    }

    pub fn apply_logical(&self, state: &PureState, region: usize, u: &Matrix2<C64>) -> Result<PureState> {
        state.apply_unitary(self.region(region)?, &self.logical_operator(u))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogicalBasis {
    X,
    Y,
    Z,
}

impl LogicalBasis {
    /// Columns are the logical outcome vectors.
    pub fn vectors(self) -> Matrix2<C64> {
        let s = 1.0 / 2f64.sqrt();
        match self {
            LogicalBasis::X => pauli::h(),
            LogicalBasis::Y => Matrix2::new(cr(s), cr(s), c(0.0, s), c(0.0, -s)),
            LogicalBasis::Z => Matrix2::identity(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LogicalOutcome {
    pub outcome: usize,
    pub probability: f64,
    /// Remaining regions after the measured one is removed.
    pub state: Option<PureState>,
}

/// Joint projective measurement of one region in a logical basis. Also
/// returns the weight found outside the codespace (0 for encoded states).
pub fn logical_measure(net: &LogicalNetwork, state: &PureState, region: usize, basis: LogicalBasis) -> Result<(Vec<LogicalOutcome>, f64)> {
    let sites = net.region(region)?.to_vec();
    let vecs = basis.vectors();
    let mut out = Vec::new();
    let mut total = 0.0;
    for k in 0..2 {
        let v = net.encoded_vector(region, &vecs.column(k).into_owned())?;
        let (p, post) = state.project_out(&sites, &v)?;
        total += p;
        out.push(LogicalOutcome { outcome: k, probability: p, state: post });
    }
    Ok((out, (1.0 - total).max(0.0)))
}

/// (|0_L0_L⟩ + |1_L1_L⟩)/√2 on regions a, b.
pub fn logical_bell(net: &LogicalNetwork, a: usize, b: usize) -> Result<PureState> {
    let s = cr(1.0 / 2f64.sqrt());
    net.encode(&DVector::from_column_slice(&[s, cr(0.0), cr(0.0), s]), &[a, b])
}

/// One branch of the GHZ → Bell reduction.
#[derive(Clone, Debug)]
pub struct BellBranch {
    pub outcomes: Vec<usize>,
    pub probability: f64,
    pub state: PureState,
}

/// Measures every region except `a` and `b` in X_L and applies Z_L on `a`
/// when the outcome parity is odd.
pub fn ghz_to_bell(net: &LogicalNetwork, state: &PureState, a: usize, b: usize) -> Result<Vec<BellBranch>> {
    if a == b || a >= net.regions.len() || b >= net.regions.len() {
        return Err(Error::InvalidParameter(format!("regions {a} and {b}")));
    }
    let mut branches = vec![BellBranch { outcomes: vec![], probability: 1.0, state: state.clone() }];
    for r in (0..net.regions.len()).filter(|&r| r != a && r != b) {
        let mut next = Vec::new();
        for br in branches {
            let (outs, _) = logical_measure(net, &br.state, r, LogicalBasis::X)?;
            for o in outs {
                if let Some(s) = o.state {
                    let mut outcomes = br.outcomes.clone();
                    outcomes.push(o.outcome);
                    next.push(BellBranch { outcomes, probability: br.probability * o.probability, state: s });
                }
            }
        }
        branches = next;
    }
    branches
        .into_iter()
        .map(|br| {
            let odd = br.outcomes.iter().sum::<usize>() % 2 == 1;
            let state = if odd { net.apply_logical(&br.state, a, &pauli::z())? } else { br.state };
            Ok(BellBranch { state, ..br })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
enum DlPhase {
    Measure(usize),
    Filter,
    Correct,
    Finished,
}

/// X measurements on the region except the target, then a filter that
/// equalizes the two branch vectors and a unitary correction.
#[derive(Clone, Debug)]
struct LogicalDownload {
    zero: PureState,
    one: PureState,
    others: Vec<Site>,
    target: Site,
    outcomes: Vec<usize>,
    map: Option<Matrix2<C64>>,
    fix: Option<[Matrix2<C64>; 2]>,
    phase: DlPhase,
    success: bool,
}

impl LogicalDownload {
    /// Columns: unnormalized target vectors that |0_L⟩ and |1_L⟩ leave after
    /// the recorded X outcomes, both on one common scale.
    fn branch_map(&self) -> Matrix2<C64> {
        let h = pauli::h();
        let labels = self.zero.labels();
        let tpos = labels.iter().position(|&s| s == self.target).expect("target in region");
        let mut m = Matrix2::zeros();
        for (col, w) in [&self.zero, &self.one].into_iter().enumerate() {
            for (idx, amp) in w.amplitudes().iter().enumerate() {
                let mut weight = *amp;
                for (site, &o) in self.others.iter().zip(&self.outcomes) {
                    let pos = labels.iter().position(|s| s == site).expect("site in region");
                    weight *= h[((idx >> pos) & 1, o)].conj();
                }
                m[((idx >> tpos) & 1, col)] += weight;
            }
        }
        m
    }
}

impl Procedure for LogicalDownload {
    fn next(&mut self) -> Result<Action> {
        loop {
            match self.phase {
                DlPhase::Measure(k) if k < self.others.len() => {
                    return Ok(Action::measure1(self.others[k], &pauli::h(), "X"));
                }
                DlPhase::Measure(_) => {
                    let m = self.branch_map();
                    self.map = Some(m);
                    if unitary_part(&m).is_some() {
                        self.phase = DlPhase::Correct;
                    } else {
                        self.fix = equalizing_filter(&m);
                        self.phase = if self.fix.is_some() { DlPhase::Filter } else { DlPhase::Finished };
                    }
                }
                DlPhase::Filter => {
                    return Ok(Action::Filter { site: self.target, kraus: self.fix.expect("filter").to_vec(), label: "filter" });
                }
                DlPhase::Correct => {
                    let mut m = self.map.expect("branch map");
                    if let Some(f) = self.fix {
                        m = f[0] * m;
                    }
                    let u = unitary_part(&m).ok_or_else(|| Error::Precondition("filtered map is not unitary".into()))?;
                    return Ok(Action::Unitary { sites: vec![self.target], u: to_dmatrix(&u.adjoint()), label: "correct" });
                }
                DlPhase::Finished => return Ok(Action::Done),
            }
        }
    }

    fn observe(&mut self, o: usize) {
        self.phase = match self.phase {
            DlPhase::Measure(k) => {
                self.outcomes.push(o);
                DlPhase::Measure(k + 1)
            }
            DlPhase::Filter if o == 0 => DlPhase::Correct,
            DlPhase::Correct => {
                self.success = true;
                DlPhase::Finished
            }
            _ => DlPhase::Finished,
        };
    }

    fn finish(&self) -> Finish {
        let mut notes = BTreeMap::new();
        if let Some(m) = self.map {
            let (a, b) = (m.column(0).norm_squared(), m.column(1).norm_squared());
            // Relative weight of the two logical branches before the filter.
            notes.insert("branch_weight_ratio".into(), if b > 0.0 { a / b } else { f64::INFINITY });
            notes.insert("filtered".into(), f64::from(u8::from(self.fix.is_some())));
        }
        Finish {
            success: self.success,
            localized: if self.success { vec![self.target] } else { vec![] },
            frame: self.map,
            notes,
            ..Default::default()
        }
    }
}

/// Localizes the logical qubit of `region` onto `target` (a site of that
/// region): X measurements on the other sites map |0_L⟩, |1_L⟩ to two target
/// vectors; a filter restores their relative weight when they differ.
pub fn probabilistic_logical_download(net: &LogicalNetwork, state: PureState, region: usize, target: Site, mode: RunMode) -> Result<ProtocolRun> {
    let sites = net.region(region)?.to_vec();
    if !sites.contains(&target) {
        return Err(Error::InvalidSite(target));
    }
    let offset = sites[0] - 1;
    let relabel = |w: &PureState| w.relabel(w.labels().iter().map(|s| s + offset).collect());
    let p = LogicalDownload {
        zero: relabel(&net.codewords.zero)?,
        one: relabel(&net.codewords.one)?,
        others: sites.iter().copied().filter(|&s| s != target).collect(),
        target,
        outcomes: vec![],
        map: None,
        fix: None,
        phase: DlPhase::Measure(0),
        success: false,
    };
    run_procedure(p, state, mode)
}
