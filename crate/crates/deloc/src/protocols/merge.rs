//! Fusing maximal wires.

use nalgebra::{DMatrix, Matrix2, Vector2};

use super::engine::{Action, Finish, Procedure};
use super::frame::{unitary_part, DecoupleMode, Decoupler, Kit};
use crate::qcore::{cr, pauli, Site, C64};
use crate::{Error, Result};

/// CNOT with the first listed site (low bit) as control.
pub(crate) fn cnot() -> DMatrix<C64> {
    let mut u = DMatrix::zeros(4, 4);
    for a in 0..2 {
        for b in 0..2 {
            u[(a + 2 * (b ^ a), a + 2 * b)] = cr(1.0);
        }
    }
    u
}

#[derive(Clone, Debug, PartialEq)]
enum BPhase {
    Entangle,
    Measure,
    Fix(usize),
    Finished,
}

/// Joins the boundary site of one wire to the first site of another.
#[derive(Clone, Debug)]
pub(crate) struct MergeBoundary {
    pub a: Site,
    pub b: Site,
    pub rest: Vec<Site>,
    phase: BPhase,
}

impl MergeBoundary {
    pub fn new(a: Site, b: Site, rest: Vec<Site>) -> Self {
        MergeBoundary { a, b, rest, phase: BPhase::Entangle }
    }
}

impl Procedure for MergeBoundary {
    fn next(&mut self) -> Result<Action> {
        Ok(match self.phase {
            BPhase::Entangle => Action::Unitary { sites: vec![self.a, self.b], u: cnot(), label: "cnot" },
            BPhase::Measure => Action::measure1(self.b, &pauli::i(), "Z"),
            BPhase::Fix(k) => Action::unitary1(self.rest[k], &pauli::x(), "X-fix"),
            BPhase::Finished => Action::Done,
        })
    }

    fn observe(&mut self, o: usize) {
        self.phase = match self.phase {
            BPhase::Entangle => BPhase::Measure,
            BPhase::Measure if o == 1 && !self.rest.is_empty() => BPhase::Fix(0),
            BPhase::Fix(k) if k + 1 < self.rest.len() => BPhase::Fix(k + 1),
            _ => BPhase::Finished,
        };
    }

    fn finish(&self) -> Finish {
        Finish { success: true, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum SPhase {
    Entangle(usize),
    Measure(usize),
    Decouple(usize),
    Correct(usize),
    Center,
    CenterFix,
    Finished,
}

/// Star fusion of maximal wires through their first sites. The first site of
/// wire 0 becomes the hub; the second site of every wire is kept and the rest
/// decoupled, leaving a GHZ state on hub + kept sites.
#[derive(Clone, Debug)]
pub(crate) struct MergeStar {
    kit: Kit,
    wires: Vec<Vec<Site>>,
    left: Vector2<C64>,
    flips: Vec<usize>,
    decs: Vec<Decoupler>,
    measure_hub: bool,
    hub_outcome: Option<usize>,
    phase: SPhase,
}

impl MergeStar {
    pub fn new(kit: Kit, wires: Vec<Vec<Site>>, left: Vector2<C64>, measure_hub: bool) -> Result<Self> {
        if wires.len() < 2 {
            return Err(Error::Precondition("a star merge needs at least two wires".into()));
        }
        let decs = wires
            .iter()
            .map(|w| {
                if w.len() < 3 {
                    return Err(Error::WireExhausted("every wire in a star merge needs three sites".into()));
                }
                Decoupler::new(&kit, w[2..].to_vec(), DecoupleMode::Full)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MergeStar { kit, flips: vec![0; wires.len()], wires, left, decs, measure_hub, hub_outcome: None, phase: SPhase::Entangle(1) })
    }

    fn hub(&self) -> Site {
        self.wires[0][0]
    }

    fn kept(&self, w: usize) -> Site {
        self.wires[w][1]
    }

    /// Map from the hub value to the kept site of wire `w`.
    fn branch_map(&self, w: usize) -> Result<Matrix2<C64>> {
        let rho = self.decs[w].rho.ok_or_else(|| Error::Precondition("decoupling did not finish".into()))?;
        let c = self.kit.e.adjoint() * self.left;
        let flip = if self.flips[w] == 1 { pauli::x() } else { pauli::i() };
        let m = self.kit.b * Matrix2::from_diagonal(&rho) * self.kit.e.adjoint() * self.kit.phis * Matrix2::from_diagonal(&c) * flip;
        unitary_part(&m).ok_or_else(|| Error::Precondition("left boundary does not give balanced branches".into()))
    }
}

impl Procedure for MergeStar {
    fn next(&mut self) -> Result<Action> {
        loop {
            match self.phase.clone() {
                SPhase::Entangle(w) => {
                    return Ok(Action::Unitary { sites: vec![self.hub(), self.wires[w][0]], u: cnot(), label: "cnot" });
                }
                SPhase::Measure(w) => return Ok(Action::measure1(self.wires[w][0], &pauli::i(), "Z")),
                SPhase::Decouple(w) => {
                    if self.decs[w].finished() {
                        self.phase = if w + 1 < self.wires.len() { SPhase::Decouple(w + 1) } else { SPhase::Correct(0) };
                        continue;
                    }
                    let kit = self.kit.clone();
                    return Ok(self.decs[w].next(&kit));
                }
                SPhase::Correct(w) => {
                    let u = self.branch_map(w)?;
                    return Ok(Action::unitary1(self.kept(w), &u.adjoint(), "correct"));
                }
                SPhase::Center => return Ok(Action::measure1(self.hub(), &pauli::h(), "X")),
                SPhase::CenterFix => return Ok(Action::unitary1(self.kept(0), &pauli::z(), "Z-fix")),
                SPhase::Finished => return Ok(Action::Done),
            }
        }
    }

    fn observe(&mut self, o: usize) {
        let last = self.wires.len() - 1;
        self.phase = match self.phase.clone() {
            SPhase::Entangle(w) if w < last => SPhase::Entangle(w + 1),
            SPhase::Entangle(_) => SPhase::Measure(1),
            SPhase::Measure(w) => {
                self.flips[w] = o;
                if w < last {
                    SPhase::Measure(w + 1)
                } else {
                    SPhase::Decouple(0)
                }
            }
            SPhase::Decouple(w) => {
                let kit = self.kit.clone();
                self.decs[w].observe(&kit, o);
                SPhase::Decouple(w)
            }
            SPhase::Correct(w) if w < last => SPhase::Correct(w + 1),
            SPhase::Correct(_) if self.measure_hub => SPhase::Center,
            SPhase::Correct(_) => SPhase::Finished,
            SPhase::Center => {
                self.hub_outcome = Some(o);
                if o == 1 {
                    SPhase::CenterFix
                } else {
                    SPhase::Finished
                }
            }
            _ => SPhase::Finished,
        };
    }

    fn finish(&self) -> Finish {
        let mut localized = Vec::new();
        if !self.measure_hub {
            localized.push(self.hub());
        }
        localized.extend((0..self.wires.len()).map(|w| self.kept(w)));
        Finish { success: self.phase == SPhase::Finished, localized, ..Default::default() }
    }
}
