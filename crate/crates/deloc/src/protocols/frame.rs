//! Classical bookkeeping shared by the wire protocols.
//!
//! A "frame" is a 2×2 matrix mapping the logical vector to the correlation
//! vector that enters the next unmeasured site. A "pair frame" Q has one
//! column per branch of a kept site: column k is the correlation vector that
//! accompanies the kept site's k-th canonical component.

use nalgebra::{Matrix2, Vector2};

use crate::qcore::{cr, max_abs, Site, C64};
use crate::wire::{canonical_form, CanonicalBasis, WireTensors};
use crate::{Error, Result};

const EPS: f64 = 1e-9;

pub(crate) fn cols(a: Vector2<C64>, b: Vector2<C64>) -> Matrix2<C64> {
    Matrix2::from_columns(&[a, b])
}

/// m·s with s > 0 chosen so that `m` becomes unitary; None when `m` is not
/// proportional to a unitary.
pub(crate) fn unitary_part(m: &Matrix2<C64>) -> Option<Matrix2<C64>> {
    let s = (m.adjoint() * m).trace().re / 2.0;
    if s < 1e-24 {
        return None;
    }
    let u = m / cr(s.sqrt());
    (max_abs(&(u.adjoint() * u - Matrix2::identity())) < 1e-8).then_some(u)
}

pub(crate) fn hadamard_cols() -> Matrix2<C64> {
    crate::qcore::pauli::h()
}

/// Filter on a site whose two branches are the columns of `m`: the success
/// Kraus makes the columns orthogonal with equal norm, at the best possible rate.
pub(crate) fn equalizing_filter(m: &Matrix2<C64>) -> Option<[Matrix2<C64>; 2]> {
    let svd = m.svd(true, false);
    let u = svd.u?;
    let s = svd.singular_values;
    let (hi, lo) = (s[0].max(s[1]), s[0].min(s[1]));
    if hi < 1e-300 || lo / hi < 1e-12 {
        return None;
    }
    let d = Matrix2::from_diagonal(&Vector2::new(cr(lo / s[0]), cr(lo / s[1])));
    let succ = u * d * u.adjoint();
    let f = Matrix2::from_diagonal(&Vector2::new(cr((1.0 - (lo / s[0]).powi(2)).max(0.0).sqrt()), cr((1.0 - (lo / s[1]).powi(2)).max(0.0).sqrt())));
    let fail = u * f * u.adjoint();
    Some([succ, fail])
}

/// Wire data every protocol needs.
#[derive(Clone, Debug)]
pub(crate) struct Kit {
    pub t: WireTensors,
    pub cb: CanonicalBasis,
    /// Columns e0, e1.
    pub e: Matrix2<C64>,
    /// Columns m0, m1.
    pub m: Matrix2<C64>,
    /// Columns φ0, φ1.
    pub phis: Matrix2<C64>,
    /// Columns b0 = r0 m0 + r1 m1, b1 = m1: a kept site's branch vectors.
    pub b: Matrix2<C64>,
    pub filter: Option<DownloadFilter>,
}

/// Two-outcome filter with success probability 1 − |r1| for every input.
#[derive(Clone, Debug)]
pub(crate) struct DownloadFilter {
    pub succ: Matrix2<C64>,
    pub fail: Matrix2<C64>,
    /// ⟨w|b0⟩, ⟨w|b1⟩: branch weights left on the correlation space on failure.
    pub fail_weights: Vector2<C64>,
}

impl Kit {
    pub fn new(t: WireTensors) -> Result<Self> {
        let cb = canonical_form(&t)?;
        let e = cols(cb.e[0], cb.e[1]);
        let m = cols(cb.m[0], cb.m[1]);
        let phis = cols(cb.varphi[0], cb.varphi[1]);
        let b = cols(cb.m[0] * cr(cb.r0) + cb.m[1] * cb.r1, cb.m[1]);
        let filter = Self::download_filter(&cb);
        Ok(Kit { t, cb, e, m, phis, b, filter })
    }

    pub fn maximal(&self) -> bool {
        self.cb.r1.norm() < EPS
    }

    /// √2·A[m]: the frame update for outcome `m` of an unbiased measurement.
    pub fn step(&self, m: &Vector2<C64>) -> Matrix2<C64> {
        self.t.op(m) * cr(2f64.sqrt())
    }

    pub fn x_basis() -> Matrix2<C64> {
        hadamard_cols()
    }

    fn download_filter(cb: &CanonicalBasis) -> Option<DownloadFilter> {
        let a1 = cb.r1.norm();
        if a1 < EPS {
            return None;
        }
        let h = a1.sqrt();
        // ⟨w|m1⟩ = h, ⟨w|m0⟩ = r1 r0 / (h (1 + |r1|)).
        let wm0 = cb.r1 * cr(cb.r0 / (h * (1.0 + a1)));
        let wm1 = cr(h);
        let w = cb.m[0] * wm0.conj() + cb.m[1] * wm1.conj();
        let wn2 = w.norm_squared();
        let succ = if wn2 < 1e-300 {
            Matrix2::identity()
        } else {
            let what = w / cr(wn2.sqrt());
            Matrix2::identity() - what * what.adjoint() * cr(1.0 - (1.0 - wn2).max(0.0).sqrt())
        };
        let fail = cb.m[0] * w.adjoint();
        let b0 = cb.m[0] * cr(cb.r0) + cb.m[1] * cb.r1;
        let fail_weights = Vector2::new(w.dotc(&b0), w.dotc(&cb.m[1]));
        Some(DownloadFilter { succ, fail, fail_weights })
    }

    /// Rows of E†Q have equal magnitudes.
    pub fn rows_balanced(&self, q: &Matrix2<C64>) -> bool {
        let r = self.e.adjoint() * q;
        let s = r.norm();
        (r[(0, 0)].norm() - r[(0, 1)].norm()).abs() < EPS * s && (r[(1, 0)].norm() - r[(1, 1)].norm()).abs() < EPS * s
    }

    /// Phase χ for the XY-plane basis m± = (m0 ± e^{iχ} m1)/√2 whose "+" outcome
    /// balances the rows of the pair frame. Only meaningful when r1 = 0.
    pub fn balancing_basis(&self, q: &Matrix2<C64>) -> Option<Matrix2<C64>> {
        // Row e0 of √2A[m+]Q is a_j + z b_j with z = e^{−iχ}.
        let a = self.e.column(0).adjoint() * self.phis.column(0) * (self.e.adjoint() * q).row(0);
        let bb = self.e.column(0).adjoint() * self.phis.column(1) * (self.e.adjoint() * q).row(1);
        let (a0, a1, b0, b1) = (a[(0, 0)], a[(0, 1)], bb[(0, 0)], bb[(0, 1)]);
        let k = a0.norm_sqr() + b0.norm_sqr() - a1.norm_sqr() - b1.norm_sqr();
        let w = a0.conj() * b0 - a1.conj() * b1;
        if w.norm() < 1e-12 || k.abs() > 2.0 * w.norm() * (1.0 - 1e-12) {
            return None;
        }
        // Re(w z) = −k/2.
        let theta = (-k / (2.0 * w.norm())).clamp(-1.0, 1.0).acos();
        let z = C64::from_polar(1.0, theta - w.arg());
        let phase = z.conj();
        let s = cr(1.0 / 2f64.sqrt());
        let plus = (self.cb.m[0] + self.cb.m[1] * phase) * s;
        let minus = (self.cb.m[0] - self.cb.m[1] * phase) * s;
        Some(cols(plus, minus))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum DecoupleMode {
    /// Exact: Z once balanced, XY gamble before that (r1 = 0), X otherwise, boundary last.
    Full,
    /// r1 ≠ 0: only a rank-one canonical outcome on the first site decouples.
    Heralded,
}

#[derive(Clone, Debug)]
enum Pending {
    Z,
    Basis(Matrix2<C64>),
    Boundary(Matrix2<C64>),
    Herald,
}

/// Measures the wire to the right of a kept site until the kept site is
/// decoupled; collects the branch weights ρ.
#[derive(Clone, Debug)]
pub(crate) struct Decoupler {
    sites: Vec<Site>,
    idx: usize,
    pub q: Matrix2<C64>,
    mode: DecoupleMode,
    pending: Option<Pending>,
    pub rho: Option<Vector2<C64>>,
    pub residual: Option<(Site, Vector2<C64>)>,
    pub failed: bool,
}

impl Decoupler {
    /// `sites` runs from the first site after the kept one to the boundary.
    pub fn new(kit: &Kit, sites: Vec<Site>, mode: DecoupleMode) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::WireExhausted("no sites left to decouple the kept site".into()));
        }
        Ok(Decoupler { sites, idx: 0, q: kit.phis, mode, pending: None, rho: None, residual: None, failed: false })
    }

    pub fn finished(&self) -> bool {
        self.rho.is_some() || self.failed
    }

    pub fn next(&mut self, kit: &Kit) -> super::engine::Action {
        use super::engine::Action;
        let site = self.sites[self.idx];
        if self.idx + 1 == self.sites.len() {
            let qu = unitary_part(&self.q).expect("pair frame stays unitary");
            let mu = qu * hadamard_cols();
            self.pending = Some(Pending::Boundary(mu));
            return Action::measure1(site, &mu, "boundary");
        }
        if self.mode == DecoupleMode::Heralded {
            self.pending = Some(Pending::Herald);
            return Action::measure1(site, &kit.m, "herald");
        }
        if kit.maximal() {
            if kit.rows_balanced(&self.q) {
                self.pending = Some(Pending::Z);
                return Action::measure1(site, &kit.m, "decouple");
            }
            if let Some(basis) = kit.balancing_basis(&self.q) {
                self.pending = Some(Pending::Basis(basis));
                return Action::measure1(site, &basis, "balance");
            }
        }
        let x = Kit::x_basis();
        self.pending = Some(Pending::Basis(x));
        Action::measure1(site, &x, "X")
    }

    pub fn observe(&mut self, kit: &Kit, o: usize) {
        let next_site = self.sites.get(self.idx + 1).copied();
        match self.pending.take().expect("pending decoupling step") {
            Pending::Z => {
                let scale = if o == 0 { cr(kit.cb.r0) } else { cr(1.0) };
                let row = (kit.e.adjoint() * self.q).row(o).transpose() * scale;
                self.rho = Some(row);
                self.residual = next_site.map(|s| (s, kit.cb.varphi[o]));
            }
            Pending::Herald => {
                if o == 0 {
                    let row = (kit.e.adjoint() * self.q).row(0).transpose() * cr(kit.cb.r0);
                    self.rho = Some(row);
                    self.residual = next_site.map(|s| (s, kit.cb.varphi[0]));
                } else {
                    self.failed = true;
                }
            }
            Pending::Basis(b) => {
                self.q = kit.step(&b.column(o).into_owned()) * self.q;
                self.idx += 1;
            }
            Pending::Boundary(mu) => {
                self.rho = Some((mu.adjoint() * self.q).row(o).transpose());
                self.residual = None;
            }
        }
    }
}

/// Tracks X-basis transport along a list of sites; lost sites are skipped
/// with the tracker assuming the "+" outcome.
#[derive(Clone, Debug)]
pub(crate) struct Transporter {
    pub sites: Vec<Site>,
    pub idx: usize,
    pub frame: Matrix2<C64>,
    pub lost: Vec<Site>,
    pub loss_frames: Vec<(Site, Matrix2<C64>)>,
}

impl Transporter {
    pub fn new(sites: Vec<Site>, frame: Matrix2<C64>, lost: Vec<Site>) -> Self {
        Transporter { sites, idx: 0, frame, lost, loss_frames: Vec::new() }
    }

    /// Next X measurement, skipping lost sites; None when all sites are used.
    pub fn next(&mut self, kit: &Kit) -> Option<super::engine::Action> {
        while self.idx < self.sites.len() {
            let s = self.sites[self.idx];
            if self.lost.contains(&s) {
                self.loss_frames.push((s, self.frame));
                self.frame = kit.step(&Kit::x_basis().column(0).into_owned()) * self.frame;
                self.idx += 1;
                continue;
            }
            return Some(super::engine::Action::measure1(s, &Kit::x_basis(), "X"));
        }
        None
    }

    pub fn observe(&mut self, kit: &Kit, o: usize) {
        self.frame = kit.step(&Kit::x_basis().column(o).into_owned()) * self.frame;
        self.idx += 1;
    }
}
