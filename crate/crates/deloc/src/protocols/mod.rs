//! Measurement-based protocols on period wires.
//!
//! Every protocol is a classical procedure that picks measurements from the
//! outcomes seen so far. The engine runs it on a dense state, enumerating,
//! sampling or following the reference branch. Wires occupy sites 1..=n;
//! references and payloads use labels outside that range.

mod engine;
mod frame;
mod merge;
mod procs;

pub(crate) use engine::{Action, Finish, Procedure};
pub(crate) use frame::equalizing_filter;
pub use engine::{run_procedure, run_with_limit, ProtocolRun, ProtocolTranscript, RunMode, Step, DEFAULT_BRANCH_LIMIT, PRUNE};

use nalgebra::{DMatrix, Matrix2, Vector2};

use crate::qcore::{
    kraus_from_map, phi_plus, to_dmatrix, DensityOperator, KrausChannel, KrausMap, PureState, Site, C64,
};
use crate::wire::PeriodWire;
use crate::{Error, Result};
pub(crate) use frame::unitary_part;
use frame::Kit;
use procs::{BellUpload, Cut, DoubleLocalization, Transfer, TransferPlan};

/// Label of the reference qubit in logical Bell inputs.
pub const REFERENCE: Site = 0;

fn kit(w: &PeriodWire) -> Result<Kit> {
    Kit::new(w.tensors())
}

fn wire_sites(w: &PeriodWire) -> Vec<Site> {
    (1..=w.n()).collect()
}

fn check_wire_in(state: &PureState, w: &PeriodWire) -> Result<()> {
    match (1..=w.n()).find(|s| !state.contains(*s)) {
        Some(s) => Err(Error::InvalidSite(s)),
        None => Ok(()),
    }
}

/// Reference qubit maximally entangled with the logical qubit of `w`:
/// Σ_i |i⟩_ref Φ(|i⟩)/√2.
pub fn bell_input(w: &PeriodWire) -> Result<PureState> {
    w.chain().logical_bell_state(REFERENCE)
}

/// Payload on label n+1 next to the wire Φ(L) on 1..=n.
pub fn node_input(w: &PeriodWire, payload: &Vector2<C64>) -> Result<PureState> {
    let p = PureState::product(vec![w.n() + 1], &[*payload])?;
    w.chain().state()?.tensor(&p)
}

/// Reference (label 0) in |Φ+⟩ with a payload on label n+1, next to the wire on 1..=n.
pub fn reference_input(w: &PeriodWire) -> Result<PureState> {
    phi_plus(REFERENCE, w.n() + 1).tensor(&w.chain().state()?)
}

fn transfer(w: &PeriodWire, state: PureState, plan: TransferPlan, mode: RunMode) -> Result<ProtocolRun> {
    check_wire_in(&state, w)?;
    let p = Transfer::new(kit(w)?, plan)?;
    run_procedure(p, state, mode)
}

/// Bell measurement between the reference `aux` of a block resource and a
/// one-qubit payload. The logical qubit then holds X^aZ^b|ψ⟩, recorded in
/// `byproducts`.
pub fn upload_via_bell(resource: &PureState, aux: Site, payload: &PureState, mode: RunMode) -> Result<ProtocolRun> {
    if payload.num_qubits() != 1 {
        return Err(Error::InvalidPayload(payload.num_qubits()));
    }
    resource.position(aux)?;
    let joint = resource.tensor(payload)?;
    let p = BellUpload { aux, payload: payload.labels()[0], outcome: None };
    run_procedure(p, joint, mode)
}

/// Teleports the payload at `payload` into the wire through site 1. The
/// byproduct is the frame taking the payload to the correlation vector that
/// enters site 2.
pub fn upload_from_node(w: &PeriodWire, state: PureState, payload: Site, mode: RunMode) -> Result<ProtocolRun> {
    state.position(payload)?;
    let plan = TransferPlan { sites: wire_sites(w), left: w.left(), payload: Some(payload), transport: 0, download: false, attempts: 0, lost: vec![] };
    transfer(w, state, plan, mode)
}

/// Localizes the logical qubit on `target`, measuring the sites before it in
/// X and decoupling the sites after it. Fails with probability |r1| per attempt.
pub fn download(w: &PeriodWire, state: PureState, target: Site, mode: RunMode) -> Result<ProtocolRun> {
    download_open_destination(w, state, target, 1, mode)
}

/// Download that moves on to the next site after a failed filter, up to
/// `attempts` sites starting at `first`.
pub fn download_open_destination(w: &PeriodWire, state: PureState, first: Site, attempts: usize, mode: RunMode) -> Result<ProtocolRun> {
    if first < 1 || first > w.n() {
        return Err(Error::InvalidSite(first));
    }
    if attempts == 0 {
        return Err(Error::Precondition("at least one download attempt".into()));
    }
    let plan = TransferPlan { sites: wire_sites(w), left: w.left(), payload: None, transport: first - 1, download: true, attempts, lost: vec![] };
    transfer(w, state, plan, mode)
}

/// X-measures sites 1..=steps; the byproduct maps the logical vector to the
/// correlation vector entering site steps+1.
pub fn transport(w: &PeriodWire, state: PureState, steps: usize, mode: RunMode) -> Result<ProtocolRun> {
    if steps >= w.n() {
        return Err(Error::WireExhausted(format!("{steps} transport steps on {} sites", w.n())));
    }
    let plan = TransferPlan { sites: wire_sites(w), left: w.left(), payload: None, transport: steps, download: false, attempts: 0, lost: vec![] };
    transfer(w, state, plan, mode)
}

/// Upload at site 1, X transport over `steps` sites, download on site steps+2.
pub fn round_trip(w: &PeriodWire, state: PureState, payload: Site, steps: usize, mode: RunMode) -> Result<ProtocolRun> {
    state.position(payload)?;
    let plan = TransferPlan { sites: wire_sites(w), left: w.left(), payload: Some(payload), transport: steps, download: true, attempts: 1, lost: vec![] };
    transfer(w, state, plan, mode)
}

/// Fault injected during transport.
#[derive(Clone, Debug)]
pub enum ErrorModel {
    None,
    /// Single-qubit unitary on a wire site before any measurement.
    Pauli { site: Site, op: Matrix2<C64> },
    /// Sites that are lost; the tracker assumes the "+" outcome for them.
    Loss { sites: Vec<Site> },
    /// Single-site Kraus channel.
    Channel { site: Site, channel: KrausChannel },
}

/// Bell fidelity between the reference and the downloaded qubit.
#[derive(Clone, Debug)]
pub struct FidelityReport {
    /// Average over successful branches, weighted by their probability.
    pub fidelity: f64,
    pub success_probability: f64,
    pub min_fidelity: f64,
    pub max_fidelity: f64,
    pub branches: usize,
    /// Output ρ(reference, target) averaged over successes; only when every
    /// success lands on the same site.
    pub output: Option<DensityOperator>,
    pub target: Site,
}

/// Wire used by [`transport_with_error`]: transport over `steps` sites, the
/// target right after, and room to decouple.
pub fn error_test_wire(tau: u32, phi: f64, steps: usize) -> Result<PeriodWire> {
    PeriodWire::new(tau, phi, steps + 3)
}

#[derive(Default)]
struct Acc {
    weight: f64,
    fid: f64,
    min: f64,
    max: f64,
    branches: usize,
    out: Option<DMatrix<C64>>,
    same_site: Option<Site>,
    mixed_sites: bool,
}

impl Acc {
    fn new() -> Self {
        Acc { min: f64::INFINITY, max: f64::NEG_INFINITY, ..Default::default() }
    }

    fn add(&mut self, run: &ProtocolRun, prior: f64) -> Result<()> {
        for b in run.successes() {
            let t = *b.localized.first().ok_or_else(|| Error::Precondition("download localized nothing".into()))?;
            let state = b.result.as_ref().expect("branch state");
            let rho = state.reduced(&[REFERENCE, t])?;
            let f = rho.fidelity(&phi_plus(REFERENCE, t))?;
            let p = prior * b.branch_probability;
            self.weight += p;
            self.fid += p * f;
            self.min = self.min.min(f);
            self.max = self.max.max(f);
            self.branches += 1;
            match self.same_site {
                None => self.same_site = Some(t),
                Some(s) if s != t => self.mixed_sites = true,
                _ => {}
            }
            let m = rho.matrix() * C64::from(p);
            self.out = Some(match self.out.take() {
                Some(o) => o + m,
                None => m,
            });
        }
        Ok(())
    }

    fn report(self, total: f64) -> Result<FidelityReport> {
        let target = self.same_site.unwrap_or(0);
        let output = match (self.out, self.mixed_sites) {
            (Some(m), false) if self.weight > 0.0 => Some(DensityOperator::new(vec![REFERENCE, target], m / C64::from(self.weight))?),
            _ => None,
        };
        Ok(FidelityReport {
            fidelity: if self.weight > 0.0 { self.fid / self.weight } else { 0.0 },
            success_probability: self.weight / total.max(1e-300),
            min_fidelity: if self.branches > 0 { self.min } else { 0.0 },
            max_fidelity: if self.branches > 0 { self.max } else { 0.0 },
            branches: self.branches,
            output,
            target,
        })
    }
}

fn transport_plan(w: &PeriodWire, steps: usize, lost: Vec<Site>) -> TransferPlan {
    TransferPlan { sites: wire_sites(w), left: w.left(), payload: None, transport: steps, download: true, attempts: 1, lost }
}

/// Transports the logical half of a reference Bell pair over sites
/// 1..=steps, injecting `error`, then downloads on site steps+1.
pub fn transport_with_error(w: &PeriodWire, error: &ErrorModel, steps: usize, mode: RunMode) -> Result<FidelityReport> {
    let input = bell_input(w)?;
    let check_site = |s: Site| if (1..=w.n()).contains(&s) { Ok(()) } else { Err(Error::InvalidSite(s)) };
    let kit = kit(w)?;
    let mut acc = Acc::new();
    match error {
        ErrorModel::None => {
            let run = run_procedure(Transfer::new(kit, transport_plan(w, steps, vec![]))?, input, mode)?;
            acc.add(&run, 1.0)?;
        }
        ErrorModel::Pauli { site, op } => {
            check_site(*site)?;
            let s = input.apply_unitary(&[*site], &to_dmatrix(op))?;
            let run = run_procedure(Transfer::new(kit, transport_plan(w, steps, vec![]))?, s, mode)?;
            acc.add(&run, 1.0)?;
        }
        ErrorModel::Loss { sites } => {
            for s in sites {
                check_site(*s)?;
            }
            let run = run_procedure(Transfer::new(kit, transport_plan(w, steps, sites.clone()))?, input, mode)?;
            acc.add(&run, 1.0)?;
        }
        ErrorModel::Channel { site, channel } => {
            check_site(*site)?;
            for k in channel.operators() {
                if k.nrows() != 2 {
                    return Err(Error::DimensionMismatch("error channel must act on one qubit".into()));
                }
                let (p, post) = input.apply_operator(&[*site], k)?;
                if let Some(post) = post {
                    let run = run_procedure(Transfer::new(kit.clone(), transport_plan(w, steps, vec![]))?, post, mode)?;
                    acc.add(&run, p)?;
                }
            }
        }
    }
    acc.report(1.0)
}

/// Effect of lost sites on a transported Bell pair.
#[derive(Clone, Debug)]
pub struct LossReport {
    pub fidelity: f64,
    pub success_probability: f64,
    /// Channel reference → target read off the output averaged over successes.
    pub channel: Option<KrausMap>,
    /// Per successful branch: its probability, its channel, and for a single
    /// loss the channel conjugated into the frame of the lost site.
    pub branches: Vec<LossBranch>,
}

#[derive(Clone, Debug)]
pub struct LossBranch {
    pub probability: f64,
    pub channel: KrausMap,
    pub local_channel: Option<KrausChannel>,
}

/// Transports over `steps` sites with `lost` sites left unmeasured and traced out.
pub fn transport_with_losses(w: &PeriodWire, lost: &[Site], steps: usize, mode: RunMode) -> Result<LossReport> {
    if lost.is_empty() {
        return Err(Error::Precondition("no lost sites given".into()));
    }
    let input = bell_input(w)?;
    let run = run_procedure(Transfer::new(kit(w)?, transport_plan(w, steps, lost.to_vec()))?, input, mode)?;
    let mut acc = Acc::new();
    acc.add(&run, 1.0)?;
    let mut branches = Vec::new();
    for b in run.successes() {
        let t = b.localized[0];
        let rho = b.result.as_ref().expect("branch state").reduced(&[REFERENCE, t])?;
        let channel = kraus_from_map(&phi_plus(REFERENCE, t), &rho)?;
        let local_channel = match (lost.len(), b.loss_frames.first()) {
            (1, Some((_, p))) => {
                let u = unitary_part(p).ok_or_else(|| Error::Precondition("loss frame is not unitary".into()))?;
                Some(channel.channel.conjugated(&to_dmatrix(&u)))
            }
            _ => None,
        };
        branches.push(LossBranch { probability: b.branch_probability, channel, local_channel });
    }
    let report = acc.report(1.0)?;
    let channel = match &report.output {
        Some(out) => Some(kraus_from_map(&phi_plus(REFERENCE, report.target), out)?),
        None => None,
    };
    Ok(LossReport { fidelity: report.fidelity, success_probability: report.success_probability, channel, branches })
}

/// CJ fidelity of a transported Bell pair with `lost` sites, evaluated in the
/// correlation space. Measured sites act as the unitaries √2·A[±] and are
/// undone by the tracker; a lost site leaves W ∈ {I, P⁻¹DP} with equal weight,
/// P the tracker frame before it. Averages over every measured outcome, so it
/// agrees with a dense [`transport_with_losses`] enumeration at any length.
pub fn loss_fidelity(w: &PeriodWire, lost: &[Site]) -> Result<f64> {
    loss_fidelity_in(w, lost, false)
}

/// [`loss_fidelity`] restricted to the by-product-free branch: every measured
/// site gives "+", hidden outcomes of lost sites are still averaged. Matches
/// [`transport_with_losses`] in [`RunMode::Reference`].
pub fn loss_fidelity_reference(w: &PeriodWire, lost: &[Site]) -> Result<f64> {
    loss_fidelity_in(w, lost, true)
}

fn loss_fidelity_in(w: &PeriodWire, lost: &[Site], reference: bool) -> Result<f64> {
    let last = *lost.iter().max().ok_or_else(|| Error::Precondition("no lost sites given".into()))?;
    if lost.iter().any(|&s| s == 0) {
        return Err(Error::InvalidSite(0));
    }
    let s2 = C64::from(2f64.sqrt());
    let steps = [w.a_plus() * s2, w.a_minus() * s2];
    let d = crate::wire::phase(w.phi());
    // (weight, frame, error operators seen so far)
    let mut branches: Vec<(f64, Matrix2<C64>, Vec<Matrix2<C64>>)> = vec![(1.0, Matrix2::identity(), Vec::new())];
    for site in 1..=last {
        if lost.contains(&site) {
            for (_, p, errs) in &mut branches {
                let pinv = p.try_inverse().expect("frames are unitary");
                errs.push(pinv * d * *p);
                *p = steps[0] * *p;
            }
        } else if reference {
            for (_, p, _) in &mut branches {
                *p = steps[0] * *p;
            }
        } else {
            branches = branches
                .into_iter()
                .flat_map(|(wt, p, errs)| steps.iter().map(move |v| (wt / 2.0, v * p, errs.clone())).collect::<Vec<_>>())
                .collect();
        }
    }
    let mut f = 0.0;
    for (wt, _, errs) in &branches {
        let m = errs.len();
        for mask in 0..1usize << m {
            let k = (0..m).fold(Matrix2::identity(), |acc, i| if mask >> i & 1 == 1 { errs[i] * acc } else { acc });
            f += wt / (1 << m) as f64 * (k.trace() / C64::from(2.0)).norm_sqr();
        }
    }
    Ok(f)
}

/// Splits the wire after site `k`: sites 1..=k keep the logical qubit with k
/// as the new boundary; the remainder becomes an independent wire.
pub fn cut_wire(w: &PeriodWire, state: PureState, k: Site, mode: RunMode) -> Result<ProtocolRun> {
    check_wire_in(&state, w)?;
    if k < 1 || k >= w.n() {
        return Err(Error::InvalidSite(k));
    }
    run_procedure(Cut::new(kit(w)?, wire_sites(w), k - 1)?, state, mode)
}

/// Bell pair between wire sites k1 < k2 of the state Φ(L).
pub fn double_localization(w: &PeriodWire, k1: Site, k2: Site, mode: RunMode) -> Result<ProtocolRun> {
    if k1 < 1 || k2 >= w.n() || k1 >= k2 {
        return Err(Error::Precondition(format!("need 1 <= k1 < k2 < n, got k1={k1}, k2={k2}, n={}", w.n())));
    }
    let p = DoubleLocalization::new(kit(w)?, wire_sites(w), w.left(), k1 - 1, k2 - 1)?;
    run_procedure(p, w.chain().state()?, mode)
}

/// Extra wires that pad the distance between two localization sites to a
/// multiple of the period.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompensationStation {
    lengths: Vec<usize>,
}

impl CompensationStation {
    pub fn new(lengths: Vec<usize>) -> Self {
        CompensationStation { lengths }
    }

    /// Full station for period τ: one wire of each length 1..τ−1.
    pub fn complete(tau: u32) -> Self {
        CompensationStation { lengths: (1..tau as usize).collect() }
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn offset(tau: u32, k1: Site, k2: Site) -> usize {
        let t = tau as usize;
        (t - (k2.abs_diff(k1)) % t) % t
    }

    /// Station wire needed for (k1, k2); None when no padding is needed.
    pub fn select(&self, tau: u32, k1: Site, k2: Site) -> Result<Option<usize>> {
        match Self::offset(tau, k1, k2) {
            0 => Ok(None),
            l if self.lengths.contains(&l) => Ok(Some(l)),
            l => Err(Error::StationInsufficient(l)),
        }
    }
}

/// Double localization after splicing the selected station wire between
/// k1 and k2. A spliced maximal wire equals a longer wire, so the run uses a
/// wire extended by the station length with k2 shifted accordingly.
pub fn compensated_double_localization(w: &PeriodWire, station: &CompensationStation, k1: Site, k2: Site, mode: RunMode) -> Result<ProtocolRun> {
    let extra = station.select(w.tau(), k1, k2)?.unwrap_or(0);
    let wide = w.clone().with_len(w.n() + extra)?;
    let mut run = double_localization(&wide, k1, k2 + extra, mode)?;
    for b in &mut run.branches {
        b.notes.insert("station_length".into(), extra as f64);
    }
    Ok(run)
}

fn require_maximal_plus(w: &PeriodWire) -> Result<()> {
    if !w.is_maximal() {
        return Err(Error::Precondition(format!("merging needs maximal wires, got phi={}", w.phi())));
    }
    if (w.left() - crate::qcore::ket_plus()).norm() > 1e-12 {
        return Err(Error::Precondition("merging needs the |+> left boundary".into()));
    }
    Ok(())
}

/// Joins the boundary of `w1` (sites 1..=n1) to the first site of `w2`
/// (sites n1+1..=n1+n2). The result is a single wire of n1+n2−1 sites on
/// labels 1..=n1, n1+2..=n1+n2.
pub fn merge_boundary(w1: &PeriodWire, w2: &PeriodWire, mode: RunMode) -> Result<ProtocolRun> {
    require_maximal_plus(w1)?;
    require_maximal_plus(w2)?;
    if w1.tau() != w2.tau() {
        return Err(Error::Precondition("merged wires must share the period".into()));
    }
    let (n1, n2) = (w1.n(), w2.n());
    let state = w1.chain().state()?.tensor(&w2.chain().state_at(n1 + 1)?)?;
    let p = merge::MergeBoundary::new(n1, n1 + 1, (n1 + 2..=n1 + n2).collect());
    run_procedure(p, state, mode)
}

/// Labels of the merged wire produced by [`merge_boundary`].
pub fn merged_labels(n1: usize, n2: usize) -> Vec<Site> {
    (1..=n1).chain(n1 + 2..=n1 + n2).collect()
}

/// Star fusion of maximal wires laid out consecutively. Leaves GHZ on the hub
/// (first site of the first wire) and the second site of every wire, or, with
/// `measure_hub`, GHZ on the second sites alone.
pub fn merge_star(wires: &[PeriodWire], measure_hub: bool, mode: RunMode) -> Result<ProtocolRun> {
    let first = wires.first().ok_or_else(|| Error::Precondition("no wires".into()))?;
    let mut state: Option<PureState> = None;
    let mut layout = Vec::new();
    let mut next = 1;
    for w in wires {
        require_maximal_plus(w)?;
        if w.tau() != first.tau() {
            return Err(Error::Precondition("merged wires must share the period".into()));
        }
        let s = w.chain().state_at(next)?;
        layout.push((next..next + w.n()).collect::<Vec<_>>());
        next += w.n();
        state = Some(match state {
            Some(acc) => acc.tensor(&s)?,
            None => s,
        });
    }
    let p = merge::MergeStar::new(kit(first)?, layout, first.left(), measure_hub)?;
    run_procedure(p, state.expect("at least one wire"), mode)
}

/// |0…0⟩ + |1…1⟩ over `sites`, first site low bit.
pub fn ghz(sites: &[Site]) -> Result<PureState> {
    let n = sites.len();
    let mut amps = nalgebra::DVector::zeros(1 << n);
    let s = C64::from(1.0 / 2f64.sqrt());
    amps[0] = s;
    amps[(1 << n) - 1] = s;
    PureState::new(sites.to_vec(), amps)
}
