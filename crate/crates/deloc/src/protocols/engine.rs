use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::qcore::{to_dmatrix, PureState, Site, C64};
use crate::{Error, Result};

/// Branches below this absolute probability are dropped and counted as truncated mass.
pub const PRUNE: f64 = 1e-14;
pub const DEFAULT_BRANCH_LIMIT: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    /// Every branch with non-negligible probability.
    EnumerateAll,
    /// One branch, outcomes drawn from a ChaCha8 stream.
    Sample { seed: u64 },
    /// One branch following outcome 0 (the by-product-free path).
    Reference,
}

/// One operation in a branch.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub sites: Vec<Site>,
    pub label: String,
    pub outcome: usize,
    /// Conditional probability of this outcome.
    pub probability: f64,
}

/// Record of one protocol branch.
#[derive(Clone, Debug)]
pub struct ProtocolTranscript {
    pub steps: Vec<Step>,
    /// Logical frame left on the correlation space (or logical level).
    pub byproducts: Matrix2<C64>,
    pub branch_probability: f64,
    /// Final state of the unmeasured qubits.
    pub result: Option<PureState>,
    /// Sites now holding localized information.
    pub localized: Vec<Site>,
    pub success: bool,
    /// First site of the untouched residual wire and its correlation vector.
    pub residual: Option<(Site, Vector2<C64>)>,
    /// Tracker frame in force when each lost site was skipped.
    pub loss_frames: Vec<(Site, Matrix2<C64>)>,
    pub notes: BTreeMap<String, f64>,
}

/// All branches of a run plus the probability mass that was not explored.
#[derive(Clone, Debug)]
pub struct ProtocolRun {
    pub branches: Vec<ProtocolTranscript>,
    pub truncated_mass: f64,
}

impl ProtocolRun {
    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.branch_probability).sum()
    }

    pub fn success_probability(&self) -> f64 {
        self.branches.iter().filter(|b| b.success).map(|b| b.branch_probability).sum()
    }

    pub fn successes(&self) -> impl Iterator<Item = &ProtocolTranscript> {
        self.branches.iter().filter(|b| b.success)
    }
}

#[derive(Clone, Debug)]
pub enum Action {
    /// Projective measurement; columns of `basis` are the outcomes. Measured sites are removed.
    Measure { sites: Vec<Site>, basis: DMatrix<C64>, label: &'static str },
    /// Generalized measurement on one site; the site is kept.
    Filter { site: Site, kraus: Vec<Matrix2<C64>>, label: &'static str },
    Unitary { sites: Vec<Site>, u: DMatrix<C64>, label: &'static str },
    Done,
}

impl Action {
    pub fn measure1(site: Site, basis: &Matrix2<C64>, label: &'static str) -> Self {
        Action::Measure { sites: vec![site], basis: to_dmatrix(basis), label }
    }

    pub fn unitary1(site: Site, u: &Matrix2<C64>, label: &'static str) -> Self {
        Action::Unitary { sites: vec![site], u: to_dmatrix(u), label }
    }
}

/// Summary a procedure hands back when it is done.
#[derive(Clone, Debug, Default)]
pub struct Finish {
    pub success: bool,
    pub localized: Vec<Site>,
    pub frame: Option<Matrix2<C64>>,
    pub residual: Option<(Site, Vector2<C64>)>,
    pub loss_frames: Vec<(Site, Matrix2<C64>)>,
    pub notes: BTreeMap<String, f64>,
}

/// A measurement protocol driven only by classical outcomes; it never sees
/// the quantum state, so every correction it applies is physically available.
pub trait Procedure: Clone {
    fn next(&mut self) -> Result<Action>;
    fn observe(&mut self, outcome: usize);
    fn finish(&self) -> Finish;
}

struct Branch<P> {
    proc: P,
    state: PureState,
    steps: Vec<Step>,
    prob: f64,
}

/// Probabilities and post-states of every outcome of an action.
fn outcomes(state: &PureState, action: &Action) -> Result<Vec<(f64, Option<PureState>)>> {
    match action {
        Action::Measure { sites, basis, .. } => {
            if basis.nrows() != 1 << sites.len() || !crate::qcore::is_unitary(basis, 1e-9) {
                return Err(Error::InvalidBasis(format!("protocol basis on {} sites", sites.len())));
            }
            (0..basis.ncols()).map(|j| state.project_out(sites, &basis.column(j).into_owned())).collect()
        }
        Action::Filter { site, kraus, .. } => kraus.iter().map(|k| state.apply_operator(&[*site], &to_dmatrix(k))).collect(),
        Action::Unitary { sites, u, .. } => Ok(vec![(1.0, Some(state.apply_unitary(sites, u)?))]),
        Action::Done => unreachable!(),
    }
}

fn sites_of(action: &Action) -> (Vec<Site>, &'static str) {
    match action {
        Action::Measure { sites, label, .. } | Action::Unitary { sites, label, .. } => (sites.clone(), label),
        Action::Filter { site, label, .. } => (vec![*site], label),
        Action::Done => (vec![], "done"),
    }
}

fn transcript<P: Procedure>(b: Branch<P>) -> ProtocolTranscript {
    let f = b.proc.finish();
    ProtocolTranscript {
        steps: b.steps,
        byproducts: f.frame.unwrap_or_else(Matrix2::identity),
        branch_probability: b.prob,
        result: Some(b.state),
        localized: f.localized,
        success: f.success,
        residual: f.residual,
        loss_frames: f.loss_frames,
        notes: f.notes,
    }
}

/// Runs a procedure on `state` under `mode`.
pub fn run_procedure<P: Procedure>(proc: P, state: PureState, mode: RunMode) -> Result<ProtocolRun> {
    run_with_limit(proc, state, mode, DEFAULT_BRANCH_LIMIT)
}

pub fn run_with_limit<P: Procedure>(proc: P, state: PureState, mode: RunMode, limit: usize) -> Result<ProtocolRun> {
    let mut rng = match mode {
        RunMode::Sample { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let mut stack = vec![Branch { proc, state, steps: Vec::new(), prob: 1.0 }];
    let mut done = Vec::new();
    let mut truncated = 0.0;
    while let Some(mut b) = stack.pop() {
        let action = b.proc.next()?;
        if matches!(action, Action::Done) {
            done.push(transcript(b));
            continue;
        }
        let outs = outcomes(&b.state, &action)?;
        let (sites, label) = sites_of(&action);
        let total: f64 = outs.iter().map(|(p, _)| p).sum();
        let pick = match mode {
            RunMode::EnumerateAll => None,
            RunMode::Reference => Some(outs.iter().position(|(p, s)| s.is_some() && p / total > PRUNE).unwrap_or(0)),
            RunMode::Sample { .. } => {
                let r: f64 = rng.as_mut().expect("rng").random::<f64>() * total;
                let mut acc = 0.0;
                let mut k = outs.len() - 1;
                for (i, (p, _)) in outs.iter().enumerate() {
                    acc += p;
                    if r < acc {
                        k = i;
                        break;
                    }
                }
                Some(k)
            }
        };
        let mut children = Vec::new();
        for (k, (p, post)) in outs.into_iter().enumerate() {
            if pick.is_some_and(|j| j != k) {
                continue;
            }
            let absolute = b.prob * p;
            let Some(post) = post else {
                if pick.is_none() {
                    truncated += absolute;
                    continue;
                }
                return Err(Error::Precondition(format!("outcome {k} of '{label}' leaves no state")));
            };
            if pick.is_none() && absolute < PRUNE {
                truncated += absolute;
                continue;
            }
            let mut proc = b.proc.clone();
            proc.observe(k);
            let mut steps = b.steps.clone();
            steps.push(Step { sites: sites.clone(), label: label.to_string(), outcome: k, probability: p });
            let prob = if pick.is_some() { b.prob * p / total } else { absolute };
            children.push(Branch { proc, state: post, steps, prob });
        }
        // Reverse so that outcome 0 is explored first.
        for c in children.into_iter().rev() {
            if stack.len() + done.len() >= limit {
                truncated += c.prob;
                continue;
            }
            stack.push(c);
        }
    }
    Ok(ProtocolRun { branches: done, truncated_mass: truncated })
}
