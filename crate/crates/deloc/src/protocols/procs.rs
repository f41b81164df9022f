//! Procedures on a single wire.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix2, Vector2};

use super::engine::{Action, Finish, Procedure};
use super::frame::{equalizing_filter, unitary_part, DecoupleMode, Decoupler, Kit, Transporter};
use crate::qcore::{bell_byproduct, cr, pauli, Site, C64};
use crate::{Error, Result};

fn internal(msg: &str) -> Error {
    Error::Precondition(format!("internal bookkeeping: {msg}"))
}

#[derive(Clone, Debug, PartialEq)]
enum Phase {
    UploadFilter,
    UploadBell,
    Transport,
    TargetFilter,
    Discard,
    Decouple,
    Correct,
    Finished,
}

/// Upload (optional) → X transport → download with up to `attempts` sites.
#[derive(Clone, Debug)]
pub(crate) struct Transfer {
    kit: Kit,
    sites: Vec<Site>,
    phase: Phase,
    payload: Option<Site>,
    /// Site-1 branch matrix during upload.
    up_m: Matrix2<C64>,
    tr: Transporter,
    download: bool,
    target: usize,
    attempts_left: usize,
    attempts_used: usize,
    keep: Matrix2<C64>,
    dec: Option<Decoupler>,
    correction: Option<Matrix2<C64>>,
    frame_at_download: Option<Matrix2<C64>>,
    success: bool,
    failed: bool,
}

pub(crate) struct TransferPlan {
    pub sites: Vec<Site>,
    pub left: Vector2<C64>,
    pub payload: Option<Site>,
    /// Number of wire sites consumed before the target (after the upload site).
    pub transport: usize,
    pub download: bool,
    pub attempts: usize,
    pub lost: Vec<Site>,
}

impl Transfer {
    pub fn new(kit: Kit, plan: TransferPlan) -> Result<Self> {
        let n = plan.sites.len();
        let start = usize::from(plan.payload.is_some());
        let target = start + plan.transport;
        let transported: Vec<Site> = plan.sites[start..target.min(n)].to_vec();
        if plan.lost.iter().any(|s| !transported.contains(s)) {
            return Err(Error::Precondition("lost sites must lie in the transport segment".into()));
        }
        if target > n || (plan.download && target + plan.attempts.max(1) > n.saturating_sub(1)) {
            return Err(Error::WireExhausted(format!(
                "{n} sites cannot host {} transport steps and {} download attempts",
                plan.transport, plan.attempts
            )));
        }
        let (phase, up_m) = match plan.payload {
            Some(_) => {
                let c = kit.e.adjoint() * plan.left;
                let m = kit.b * Matrix2::from_diagonal(&c);
                if unitary_part(&m).is_some() {
                    (Phase::UploadBell, m)
                } else {
                    (Phase::UploadFilter, m)
                }
            }
            None => (Phase::Transport, Matrix2::identity()),
        };
        Ok(Transfer {
            tr: Transporter::new(transported, Matrix2::identity(), plan.lost),
            kit,
            sites: plan.sites,
            phase,
            payload: plan.payload,
            up_m,
            download: plan.download,
            target,
            attempts_left: plan.attempts.max(1),
            attempts_used: 0,
            keep: Matrix2::identity(),
            dec: None,
            correction: None,
            frame_at_download: None,
            success: false,
            failed: false,
        })
    }

    fn upload_basis(&self) -> Result<DMatrix<C64>> {
        let g = unitary_part(&self.up_m).ok_or_else(|| internal("upload branches not orthogonal"))?;
        let s = cr(1.0 / 2f64.sqrt());
        let mut basis = DMatrix::zeros(4, 4);
        for idx in 0..4 {
            let (a, b) = bell_byproduct(idx);
            let p = pauli::xz(a, b);
            for pb in 0..2 {
                for sb in 0..2 {
                    basis[(pb + 2 * sb, idx)] = (0..2).map(|j| p[(pb, j)] * g[(sb, j)]).sum::<C64>() * s;
                }
            }
        }
        Ok(basis)
    }

    fn after_transport(&mut self) {
        self.phase = if self.download { Phase::TargetFilter } else { Phase::Finished };
        if !self.download {
            self.success = true;
        }
    }
}

impl Procedure for Transfer {
    fn next(&mut self) -> Result<Action> {
        loop {
            match self.phase {
                Phase::UploadFilter => {
                    let f = equalizing_filter(&self.up_m).ok_or_else(|| Error::Precondition("upload site carries no entanglement".into()))?;
                    return Ok(Action::Filter { site: self.sites[0], kraus: f.to_vec(), label: "upload-filter" });
                }
                Phase::UploadBell => {
                    let payload = self.payload.expect("payload");
                    return Ok(Action::Measure { sites: vec![payload, self.sites[0]], basis: self.upload_basis()?, label: "upload-bell" });
                }
                Phase::Transport => match self.tr.next(&self.kit) {
                    Some(a) => return Ok(a),
                    None => self.after_transport(),
                },
                Phase::TargetFilter => {
                    let site = self.sites[self.target];
                    self.attempts_used += 1;
                    match &self.kit.filter {
                        Some(f) => {
                            return Ok(Action::Filter { site, kraus: vec![f.succ, f.fail], label: "download-filter" });
                        }
                        None => {
                            self.keep = self.kit.b;
                            self.start_decoupling()?;
                        }
                    }
                }
                Phase::Discard => {
                    return Ok(Action::measure1(self.sites[self.target], &self.kit.m, "discard"));
                }
                Phase::Decouple => {
                    let dec = self.dec.as_mut().expect("decoupler");
                    if dec.finished() {
                        let rho = dec.rho.ok_or_else(|| internal("decoupling failed"))?;
                        let frame = self.tr.frame;
                        let c = self.keep * Matrix2::from_diagonal(&rho) * self.kit.e.adjoint() * frame;
                        let u = unitary_part(&c).ok_or_else(|| internal("download map is not unitary"))?;
                        self.correction = Some(u.adjoint());
                        self.phase = Phase::Correct;
                        continue;
                    }
                    return Ok(dec.next(&self.kit));
                }
                Phase::Correct => {
                    return Ok(Action::unitary1(self.sites[self.target], &self.correction.expect("correction"), "correct"));
                }
                Phase::Finished => return Ok(Action::Done),
            }
        }
    }

    fn observe(&mut self, o: usize) {
        match self.phase {
            Phase::UploadFilter => {
                if o == 0 {
                    let f = equalizing_filter(&self.up_m).expect("filter");
                    self.up_m = f[0] * self.up_m;
                    self.phase = Phase::UploadBell;
                } else {
                    self.failed = true;
                    self.phase = Phase::Finished;
                }
            }
            Phase::UploadBell => {
                let (a, b) = bell_byproduct(o);
                self.tr.frame = self.kit.phis * pauli::xz(a, b).adjoint();
                self.phase = Phase::Transport;
            }
            Phase::Transport => self.tr.observe(&self.kit, o),
            Phase::TargetFilter => {
                let f = self.kit.filter.as_ref().expect("filter");
                if o == 0 {
                    self.keep = f.succ * self.kit.b;
                    if self.start_decoupling().is_err() {
                        self.failed = true;
                        self.phase = Phase::Finished;
                    }
                } else {
                    let p = self.kit.phis * Matrix2::from_diagonal(&f.fail_weights) * self.kit.e.adjoint() * self.tr.frame;
                    self.tr.frame = unitary_part(&p).unwrap_or(p);
                    self.phase = Phase::Discard;
                }
            }
            Phase::Discard => {
                self.attempts_left -= 1;
                if self.attempts_left == 0 || self.target + 2 > self.sites.len() - 1 {
                    self.failed = true;
                    self.phase = Phase::Finished;
                } else {
                    self.target += 1;
                    self.phase = Phase::TargetFilter;
                }
            }
            Phase::Decouple => {
                let kit = self.kit.clone();
                self.dec.as_mut().expect("decoupler").observe(&kit, o);
            }
            Phase::Correct => {
                self.success = true;
                self.phase = Phase::Finished;
            }
            Phase::Finished => {}
        }
    }

    fn finish(&self) -> Finish {
        let mut notes = BTreeMap::new();
        if self.download {
            notes.insert("attempts".into(), self.attempts_used as f64);
            if self.success {
                notes.insert("landing_site".into(), self.sites[self.target] as f64);
            }
        }
        Finish {
            success: self.success && !self.failed,
            localized: if self.download && self.success { vec![self.sites[self.target]] } else { vec![] },
            frame: Some(self.frame_at_download.unwrap_or(self.tr.frame)),
            residual: self.dec.as_ref().and_then(|d| d.residual),
            loss_frames: self.tr.loss_frames.clone(),
            notes,
        }
    }
}

impl Transfer {
    fn start_decoupling(&mut self) -> Result<()> {
        self.frame_at_download = Some(self.tr.frame);
        self.dec = Some(Decoupler::new(&self.kit, self.sites[self.target + 1..].to_vec(), DecoupleMode::Full)?);
        self.phase = Phase::Decouple;
        Ok(())
    }
}

/// Block upload by a Bell measurement between the payload and the resource's reference qubit.
#[derive(Clone, Debug)]
pub(crate) struct BellUpload {
    pub aux: Site,
    pub payload: Site,
    pub outcome: Option<usize>,
}

impl Procedure for BellUpload {
    fn next(&mut self) -> Result<Action> {
        if self.outcome.is_some() {
            return Ok(Action::Done);
        }
        let basis = crate::qcore::Basis::Bell.matrix(2)?;
        Ok(Action::Measure { sites: vec![self.aux, self.payload], basis, label: "bell" })
    }

    fn observe(&mut self, o: usize) {
        self.outcome = Some(o);
    }

    fn finish(&self) -> Finish {
        let (a, b) = bell_byproduct(self.outcome.unwrap_or(0));
        Finish { success: true, frame: Some(pauli::xz(a, b)), ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum CutPhase {
    Filter,
    Decouple,
    Fix,
    Correct,
    Finished,
}

/// Cuts the wire after site `k`: sites 1..=k become a wire with site k as its
/// boundary, the sites after the decoupling point a fresh wire.
#[derive(Clone, Debug)]
pub(crate) struct Cut {
    kit: Kit,
    sites: Vec<Site>,
    k: usize,
    phase: CutPhase,
    keep: Matrix2<C64>,
    dec: Decoupler,
    fix: Option<[Matrix2<C64>; 2]>,
    correction: Option<Matrix2<C64>>,
    success: bool,
}

impl Cut {
    pub fn new(kit: Kit, sites: Vec<Site>, k: usize) -> Result<Self> {
        if k + 1 >= sites.len() {
            return Err(Error::WireExhausted(format!("cannot cut after site index {k} of {}", sites.len())));
        }
        let mode = if kit.maximal() { DecoupleMode::Full } else { DecoupleMode::Heralded };
        let dec = Decoupler::new(&kit, sites[k + 1..].to_vec(), mode)?;
        let phase = if kit.filter.is_some() { CutPhase::Filter } else { CutPhase::Decouple };
        Ok(Cut { keep: kit.b, kit, sites, k, phase, dec, fix: None, correction: None, success: false })
    }

    fn weighted(&self) -> Matrix2<C64> {
        self.keep * Matrix2::from_diagonal(&self.dec.rho.expect("weights"))
    }
}

impl Procedure for Cut {
    fn next(&mut self) -> Result<Action> {
        loop {
            match self.phase {
                CutPhase::Filter => {
                    let f = self.kit.filter.as_ref().expect("filter");
                    return Ok(Action::Filter { site: self.sites[self.k], kraus: vec![f.succ, f.fail], label: "cut-filter" });
                }
                CutPhase::Decouple => {
                    if self.dec.failed {
                        self.phase = CutPhase::Finished;
                        continue;
                    }
                    if self.dec.finished() {
                        let w = self.weighted();
                        if unitary_part(&w).is_some() {
                            self.phase = CutPhase::Correct;
                        } else {
                            self.fix = equalizing_filter(&w);
                            self.phase = if self.fix.is_some() { CutPhase::Fix } else { CutPhase::Finished };
                        }
                        continue;
                    }
                    return Ok(self.dec.next(&self.kit));
                }
                CutPhase::Fix => {
                    return Ok(Action::Filter { site: self.sites[self.k], kraus: self.fix.expect("fix").to_vec(), label: "weight-fix" });
                }
                CutPhase::Correct => {
                    let mut w = self.weighted();
                    if let Some(f) = self.fix {
                        w = f[0] * w;
                    }
                    let u = unitary_part(&(w * self.kit.e.adjoint())).ok_or_else(|| internal("cut map is not unitary"))?;
                    self.correction = Some(u.adjoint());
                    return Ok(Action::unitary1(self.sites[self.k], &u.adjoint(), "correct"));
                }
                CutPhase::Finished => return Ok(Action::Done),
            }
        }
    }

    fn observe(&mut self, o: usize) {
        match self.phase {
            CutPhase::Filter => {
                if o == 0 {
                    self.keep = self.kit.filter.as_ref().expect("filter").succ * self.kit.b;
                    self.phase = CutPhase::Decouple;
                } else {
                    self.phase = CutPhase::Finished;
                }
            }
            CutPhase::Decouple => {
                let kit = self.kit.clone();
                self.dec.observe(&kit, o);
            }
            CutPhase::Fix => {
                self.phase = if o == 0 { CutPhase::Correct } else { CutPhase::Finished };
            }
            CutPhase::Correct => {
                self.success = true;
                self.phase = CutPhase::Finished;
            }
            CutPhase::Finished => {}
        }
    }

    fn finish(&self) -> Finish {
        Finish {
            success: self.success,
            localized: if self.success { vec![self.sites[self.k]] } else { vec![] },
            frame: self.correction,
            residual: if self.success { self.dec.residual } else { None },
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum DlPhase {
    Left,
    Filter1,
    Middle,
    Filter2,
    Decouple,
    Fix,
    Correct,
    Finished,
}

/// Bell pair between sites k1 < k2: X measurements to the left of k1 and
/// between the two, decoupling to the right of k2.
#[derive(Clone, Debug)]
pub(crate) struct DoubleLocalization {
    kit: Kit,
    sites: Vec<Site>,
    left: Vector2<C64>,
    k1: usize,
    k2: usize,
    phase: DlPhase,
    outer: Transporter,
    middle: Transporter,
    n1: Matrix2<C64>,
    n2: Matrix2<C64>,
    dec: Decoupler,
    pair: Matrix2<C64>,
    fix: Option<[Matrix2<C64>; 2]>,
    success: bool,
    pauli_fidelity: f64,
}

impl DoubleLocalization {
    pub fn new(kit: Kit, sites: Vec<Site>, left: Vector2<C64>, k1: usize, k2: usize) -> Result<Self> {
        if k1 >= k2 || k2 + 1 >= sites.len() {
            return Err(Error::Precondition(format!("need k1 < k2 < n, got {k1}, {k2} on {} sites", sites.len())));
        }
        let dec = Decoupler::new(&kit, sites[k2 + 1..].to_vec(), DecoupleMode::Full)?;
        Ok(DoubleLocalization {
            outer: Transporter::new(sites[..k1].to_vec(), Matrix2::identity(), vec![]),
            middle: Transporter::new(sites[k1 + 1..k2].to_vec(), Matrix2::identity(), vec![]),
            n1: kit.b,
            n2: kit.b,
            kit,
            sites,
            left,
            k1,
            k2,
            phase: DlPhase::Left,
            dec,
            pair: Matrix2::identity(),
            fix: None,
            success: false,
            pauli_fidelity: 0.0,
        })
    }

    fn pair_matrix(&self) -> Matrix2<C64> {
        let c = self.kit.e.adjoint() * self.outer.frame * self.left;
        let t = self.kit.e.adjoint() * self.middle.frame * self.kit.phis;
        let rho = self.dec.rho.expect("weights");
        self.n1 * Matrix2::from_diagonal(&c) * t.transpose() * Matrix2::from_diagonal(&rho) * self.n2.transpose()
    }

    fn filter_action(&self, site: usize, label: &'static str) -> Option<Action> {
        self.kit.filter.as_ref().map(|f| Action::Filter { site: self.sites[site], kraus: vec![f.succ, f.fail], label })
    }
}

impl Procedure for DoubleLocalization {
    fn next(&mut self) -> Result<Action> {
        loop {
            match self.phase {
                DlPhase::Left => match self.outer.next(&self.kit) {
                    Some(a) => return Ok(a),
                    None => self.phase = DlPhase::Filter1,
                },
                DlPhase::Filter1 => match self.filter_action(self.k1, "filter-k1") {
                    Some(a) => return Ok(a),
                    None => self.phase = DlPhase::Middle,
                },
                DlPhase::Middle => match self.middle.next(&self.kit) {
                    Some(a) => return Ok(a),
                    None => self.phase = DlPhase::Filter2,
                },
                DlPhase::Filter2 => match self.filter_action(self.k2, "filter-k2") {
                    Some(a) => return Ok(a),
                    None => self.phase = DlPhase::Decouple,
                },
                DlPhase::Decouple => {
                    if self.dec.finished() {
                        self.pair = self.pair_matrix();
                        if unitary_part(&self.pair).is_some() {
                            self.phase = DlPhase::Correct;
                        } else {
                            self.fix = equalizing_filter(&self.pair);
                            self.phase = if self.fix.is_some() { DlPhase::Fix } else { DlPhase::Finished };
                        }
                        continue;
                    }
                    return Ok(self.dec.next(&self.kit));
                }
                DlPhase::Fix => {
                    return Ok(Action::Filter { site: self.sites[self.k1], kraus: self.fix.expect("fix").to_vec(), label: "weight-fix" });
                }
                DlPhase::Correct => {
                    let k = unitary_part(&self.pair).ok_or_else(|| internal("pair is not maximally entangled"))?;
                    self.pauli_fidelity = [pauli::i(), pauli::x(), pauli::y(), pauli::z()]
                        .iter()
                        .map(|p| ((p.adjoint() * k).trace() / cr(2.0)).norm_sqr())
                        .fold(0.0, f64::max);
                    let v = k.map(|x| x.conj());
                    return Ok(Action::unitary1(self.sites[self.k2], &v, "correct"));
                }
                DlPhase::Finished => return Ok(Action::Done),
            }
        }
    }

    fn observe(&mut self, o: usize) {
        let kit = self.kit.clone();
        match self.phase {
            DlPhase::Left => self.outer.observe(&kit, o),
            DlPhase::Middle => self.middle.observe(&kit, o),
            DlPhase::Filter1 | DlPhase::Filter2 => {
                if o == 0 {
                    let succ = kit.filter.as_ref().expect("filter").succ;
                    if self.phase == DlPhase::Filter1 {
                        self.n1 = succ * kit.b;
                        self.phase = DlPhase::Middle;
                    } else {
                        self.n2 = succ * kit.b;
                        self.phase = DlPhase::Decouple;
                    }
                } else {
                    self.phase = DlPhase::Finished;
                }
            }
            DlPhase::Decouple => self.dec.observe(&kit, o),
            DlPhase::Fix => {
                if o == 0 {
                    self.pair = self.fix.expect("fix")[0] * self.pair;
                    self.phase = DlPhase::Correct;
                } else {
                    self.phase = DlPhase::Finished;
                }
            }
            DlPhase::Correct => {
                self.success = true;
                self.phase = DlPhase::Finished;
            }
            DlPhase::Finished => {}
        }
    }

    fn finish(&self) -> Finish {
        let mut notes = BTreeMap::new();
        if self.success {
            notes.insert("pauli_fidelity".into(), self.pauli_fidelity);
            notes.insert("filtered".into(), f64::from(u8::from(self.fix.is_some())));
        }
        Finish {
            success: self.success,
            localized: if self.success { vec![self.sites[self.k1], self.sites[self.k2]] } else { vec![] },
            frame: Some(self.pair),
            residual: if self.success { self.dec.residual } else { None },
            notes,
            ..Default::default()
        }
    }
}
