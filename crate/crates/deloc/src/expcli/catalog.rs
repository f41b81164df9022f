//! Experiment catalog: parameter schemas, metric names and the per-point kernels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::parse_real;
use crate::dicke::{cj_fidelity_closed, dicke_entropy, dicke_mutual_info, ConcatDickeCode, DickeCode};
use crate::lognet::{ghz_to_bell, logical_bell, Encoding, LogicalNetwork, LogicalResource, NetworkSpec};
use crate::protocols::{
    bell_input, download_open_destination, error_test_wire, ghz, loss_fidelity, loss_fidelity_reference, merge_star, transport_with_error, ErrorModel, RunMode,
};
use crate::qcore::pauli;
use crate::wire::{correlation_length, single_site_entropy, transfer_matrix, wire_mutual_info, PeriodWire};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Int,
    /// Real number; "pi", "pi/3", "2pi/3" are accepted.
    Real,
    Choice(&'static [&'static str]),
}

impl ParamKind {
    pub fn check(self, name: &str, v: &str) -> Result<()> {
        let ok = match self {
            ParamKind::Int => v.trim().parse::<i64>().is_ok(),
            ParamKind::Real => parse_real(v).is_some(),
            ParamKind::Choice(opts) => opts.contains(&v.trim()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{name}: cannot use '{v}' as {}", self.describe())))
        }
    }

    pub fn describe(self) -> String {
        match self {
            ParamKind::Int => "integer".into(),
            ParamKind::Real => "real".into(),
            ParamKind::Choice(opts) => format!("one of {}", opts.join("|")),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ParamSchema {
    pub name: &'static str,
    pub kind: ParamKind,
    /// None marks a required parameter.
    pub default: Option<&'static str>,
    pub help: &'static str,
}

/// Settings shared by every grid point of a run.
#[derive(Clone, Copy, Debug)]
pub struct RunContext {
    pub trials: u64,
    /// Seed of this grid point.
    pub seed: u64,
}

pub type Kernel = fn(&Point, &RunContext) -> Result<Vec<f64>>;

pub struct ExperimentInfo {
    pub name: &'static str,
    pub aliases: &'static [&'static str],
    pub description: &'static str,
    pub params: &'static [ParamSchema],
    pub metrics: &'static [&'static str],
    pub kernel: Kernel,
}

impl std::fmt::Debug for ExperimentInfo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExperimentInfo").field("name", &self.name).finish_non_exhaustive()
    }
}

/// One grid point: parameter names with their textual values.
#[derive(Clone, Debug)]
pub struct Point<'a> {
    pub values: Vec<(&'a str, &'a str)>,
}

impl Point<'_> {
    fn raw(&self, name: &str) -> Result<&str> {
        self.values
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| v.trim())
            .ok_or_else(|| Error::InvalidParameter(format!("missing {name}")))
    }

    pub fn int(&self, name: &str) -> Result<i64> {
        let v = self.raw(name)?;
        v.parse().map_err(|_| Error::InvalidParameter(format!("{name}: '{v}' is not an integer")))
    }

    /// Non-negative integer.
    pub fn count(&self, name: &str) -> Result<usize> {
        let v = self.int(name)?;
        usize::try_from(v).map_err(|_| Error::InvalidParameter(format!("{name} must be non-negative, got {v}")))
    }

    pub fn real(&self, name: &str) -> Result<f64> {
        let v = self.raw(name)?;
        parse_real(v).ok_or_else(|| Error::InvalidParameter(format!("{name}: '{v}' is not a real number")))
    }

    pub fn text(&self, name: &str) -> Result<&str> {
        self.raw(name)
    }

    fn tau(&self) -> Result<u32> {
        let t = self.int("tau")?;
        u32::try_from(t).map_err(|_| Error::InvalidWire(format!("period must be an integer >= 2, got {t}")))
    }
}

const fn p(name: &'static str, kind: ParamKind, default: Option<&'static str>, help: &'static str) -> ParamSchema {
    ParamSchema { name, kind, default, help }
}

const INT: ParamKind = ParamKind::Int;
const REAL: ParamKind = ParamKind::Real;

static CATALOG: &[ExperimentInfo] = &[
    ExperimentInfo {
        name: "dicke-cj",
        aliases: &[],
        description: "CJ fidelity of a Dicke-encoded Bell pair after losing qubits",
        params: &[
            p("n", INT, None, "block size"),
            p("k1", INT, Some("0"), "excitations of |0_L>"),
            p("k2", INT, Some("1"), "excitations of |1_L>"),
            p("losses", INT, Some("1"), "lost qubits"),
        ],
        metrics: &["F"],
        kernel: dicke_cj,
    },
    ExperimentInfo {
        name: "dicke-entropy",
        aliases: &[],
        description: "single-qubit entanglement entropy of a Dicke-encoded Bell pair",
        params: &[p("n", INT, None, "block size"), p("k1", INT, Some("0"), "excitations of |0_L>"), p("k2", INT, Some("1"), "excitations of |1_L>")],
        metrics: &["S"],
        kernel: dicke_entropy_kernel,
    },
    ExperimentInfo {
        name: "dicke-mutual",
        aliases: &[],
        description: "mutual information between the reference and the first `parties` block qubits",
        params: &[
            p("n", INT, None, "block size"),
            p("k1", INT, Some("0"), "excitations of |0_L>"),
            p("k2", INT, Some("1"), "excitations of |1_L>"),
            p("parties", INT, Some("1"), "number of block qubits held"),
        ],
        metrics: &["I"],
        kernel: dicke_mutual,
    },
    ExperimentInfo {
        name: "wire-cj",
        aliases: &[],
        description: "CJ fidelity of a transported wire Bell pair with the first `losses` sites lost",
        params: &[p("tau", INT, Some("4"), "period"), p("phi", REAL, Some("pi"), "entanglement factor"), p("losses", INT, Some("1"), "lost sites")],
        metrics: &["F"],
        kernel: wire_cj,
    },
    ExperimentInfo {
        name: "wire-entropy",
        aliases: &[],
        description: "single-site entanglement entropy of the wire Bell state",
        params: &[
            p("tau", INT, Some("4"), "period"),
            p("phi", REAL, Some("pi"), "entanglement factor"),
            p("n", INT, Some("64"), "wire length"),
            p("site", INT, Some("32"), "probed site"),
        ],
        metrics: &["S"],
        kernel: wire_entropy,
    },
    ExperimentInfo {
        name: "wire-mutual",
        aliases: &[],
        description: "mutual information between the reference and one wire site",
        params: &[
            p("tau", INT, Some("4"), "period"),
            p("phi", REAL, Some("pi"), "entanglement factor"),
            p("n", INT, Some("64"), "wire length"),
            p("site", INT, Some("1"), "probed site"),
        ],
        metrics: &["I"],
        kernel: wire_mutual,
    },
    ExperimentInfo {
        name: "corr-length",
        aliases: &[],
        description: "correlation length from the transfer-matrix gap",
        params: &[p("tau", INT, Some("4"), "period"), p("phi", REAL, Some("pi"), "entanglement factor")],
        metrics: &["xi"],
        kernel: corr_length,
    },
    ExperimentInfo {
        name: "transport-error",
        aliases: &[],
        description: "Bell fidelity after transport with a single-site Pauli error",
        params: &[
            p("tau", INT, Some("4"), "period"),
            p("phi", REAL, Some("pi"), "entanglement factor"),
            p("error", ParamKind::Choice(&["I", "X", "Y", "Z"]), Some("Z"), "Pauli error"),
            p("site", INT, Some("1"), "error site"),
            p("periods", INT, Some("2"), "transport length in periods"),
        ],
        metrics: &["F", "p_success", "F_min", "F_max"],
        kernel: transport_error,
    },
    ExperimentInfo {
        name: "transport-loss",
        aliases: &[],
        description: "CJ fidelity of a transported Bell pair with one or two lost sites",
        params: &[
            p("tau", INT, Some("4"), "period"),
            p("phi", REAL, Some("pi/2"), "entanglement factor"),
            p("first", INT, Some("1"), "first lost site"),
            p("separation", INT, Some("0"), "distance to the second lost site (0: single loss)"),
            p("branch", ParamKind::Choice(&["reference", "all"]), Some("reference"), "by-product-free branch or average over all outcomes"),
        ],
        metrics: &["F"],
        kernel: transport_loss,
    },
    ExperimentInfo {
        name: "download-prob",
        aliases: &["wire-download"],
        description: "success probability of a download with `attempts` consecutive destinations",
        params: &[
            p("tau", INT, Some("4"), "period"),
            p("phi", REAL, Some("pi"), "entanglement factor"),
            p("first", INT, Some("2"), "first destination site"),
            p("attempts", INT, Some("1"), "destinations tried"),
        ],
        metrics: &["p", "sigma", "p_exact"],
        kernel: download_prob,
    },
    ExperimentInfo {
        name: "logical-ghz",
        aliases: &[],
        description: "logical Bell pair from an encoded GHZ state by X_L on the other regions",
        params: &[
            p("encoding", ParamKind::Choice(&["dicke", "concat", "graph", "ghz"]), Some("dicke"), "codeword family"),
            p("n", INT, Some("3"), "block size (graph: path length, concat: base block)"),
            p("k1", INT, Some("0"), "excitations of |0_L>"),
            p("k2", INT, Some("2"), "excitations of |1_L>"),
            p("blocks", INT, Some("2"), "concatenated blocks"),
            p("regions", INT, Some("3"), "logical qubits"),
        ],
        metrics: &["F_min", "p_total", "branches"],
        kernel: logical_ghz,
    },
    ExperimentInfo {
        name: "merge-ghz",
        aliases: &[],
        description: "star fusion of maximal wires into a GHZ state",
        params: &[
            p("tau", INT, Some("4"), "period"),
            p("wires", INT, Some("3"), "number of wires"),
            p("len", INT, Some("4"), "sites per wire"),
            p("hub", INT, Some("0"), "1 measures the hub out"),
        ],
        metrics: &["F_min", "p_success", "qubits"],
        kernel: merge_ghz,
    },
];

pub fn catalog() -> &'static [ExperimentInfo] {
    CATALOG
}

/// Looks an experiment up by name or alias.
pub fn find(name: &str) -> Result<&'static ExperimentInfo> {
    CATALOG
        .iter()
        .find(|e| e.name == name || e.aliases.contains(&name))
        .ok_or_else(|| Error::UnknownExperiment(name.to_string()))
}

fn code(pt: &Point) -> Result<DickeCode> {
    DickeCode::new(pt.count("n")?, pt.count("k1")?, pt.count("k2")?)
}

fn dicke_cj(pt: &Point, _: &RunContext) -> Result<Vec<f64>> {
    Ok(vec![cj_fidelity_closed(code(pt)?, pt.count("losses")?)?])
}

fn dicke_entropy_kernel(pt: &Point, _: &RunContext) -> Result<Vec<f64>> {
    Ok(vec![dicke_entropy(code(pt)?)])
}

fn dicke_mutual(pt: &Point, _: &RunContext) -> Result<Vec<f64>> {
    let parties: Vec<usize> = (1..=pt.count("parties")?).collect();
    Ok(vec![dicke_mutual_info(code(pt)?, &parties)?])
}

fn wire(pt: &Point, n: usize) -> Result<PeriodWire> {
    PeriodWire::new(pt.tau()?, pt.real("phi")?, n)
}

fn wire_cj(pt: &Point, _: &RunContext) -> Result<Vec<f64>> {
    let losses = pt.count("losses")?;
    if losses == 0 {
        return Err(Error::InvalidParameter("losses must be at least 1".into()));
    }
    let lost: Vec<usize> = (1..=losses).collect();
    Ok(vec![loss_fidelity(&wire(pt, losses + 3)?, &lost)?])
}

fn probed(pt: &Point) -> Result<(PeriodWire, usize)> {
    let (n, site) = (pt.count("n")?, pt.count("site")?);
    if site == 0 || site > n {
        return Err(Error::InvalidSite(site));
    }
    Ok((wire(pt, n)?, site))
}

fn wire_entropy(pt: &Point, _: &RunContext) -> Result<Vec<f64>> {
    let (w, site) = probed(pt)?;
    Ok(vec![single_site_entropy(&w.chain(), site)?])
}

fn wire_mutual(pt: &Point, _: &RunContext) -> Result<Vec<f64>> {
    let (w, site) = probed(pt)?;
    Ok(vec![wire_mutual_info(&w.chain(), site)?])
}

fn corr_length(pt: &Point, _: &RunContext) -> Result<Vec<f64>> {
    let w = wire(pt, 1)?;
    Ok(vec![correlation_length(&transfer_matrix(&w.tensors()))])
}

/// Per-trial seeds drawn from the grid point's stream.
fn trial_seeds(ctx: &RunContext) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    (0..ctx.trials).map(|_| rng.random()).collect()
}

fn transport_error(pt: &Point, ctx: &RunContext) -> Result<Vec<f64>> {
    let steps = pt.count("periods")? * pt.tau()? as usize;
    let w = error_test_wire(pt.tau()?, pt.real("phi")?, steps)?;
    let op = match pt.text("error")? {
        "I" => pauli::i(),
        "X" => pauli::x(),
        "Y" => pauli::y(),
        _ => pauli::z(),
    };
    let model = ErrorModel::Pauli { site: pt.count("site")?, op };
    if ctx.trials == 0 {
        let r = transport_with_error(&w, &model, steps, RunMode::EnumerateAll)?;
        return Ok(vec![r.fidelity, r.success_probability, r.min_fidelity, r.max_fidelity]);
    }
    let (mut hits, mut sum, mut lo, mut hi) = (0u64, 0.0, f64::INFINITY, f64::NEG_INFINITY);
    for seed in trial_seeds(ctx) {
        let r = transport_with_error(&w, &model, steps, RunMode::Sample { seed })?;
        if r.branches > 0 {
            hits += 1;
            sum += r.fidelity;
            lo = lo.min(r.fidelity);
            hi = hi.max(r.fidelity);
        }
    }
    if hits == 0 {
        return Ok(vec![f64::NAN, 0.0, f64::NAN, f64::NAN]);
    }
    Ok(vec![sum / hits as f64, hits as f64 / ctx.trials as f64, lo, hi])
}

fn transport_loss(pt: &Point, _: &RunContext) -> Result<Vec<f64>> {
    let first = pt.count("first")?;
    if first == 0 {
        return Err(Error::InvalidSite(0));
    }
    let sep = pt.count("separation")?;
    let lost = if sep == 0 { vec![first] } else { vec![first, first + sep] };
    let w = wire(pt, lost[lost.len() - 1] + 3)?;
    let f = match pt.text("branch")? {
        "all" => loss_fidelity(&w, &lost)?,
        _ => loss_fidelity_reference(&w, &lost)?,
    };
    Ok(vec![f])
}

fn download_prob(pt: &Point, ctx: &RunContext) -> Result<Vec<f64>> {
    let (first, attempts) = (pt.count("first")?, pt.count("attempts")?);
    if first == 0 || attempts == 0 {
        return Err(Error::InvalidParameter("first and attempts must be at least 1".into()));
    }
    let w = wire(pt, first + attempts + 2)?;
    let exact = 1.0 - (w.phi() / 2.0).cos().abs().powi(attempts as i32);
    if ctx.trials == 0 {
        let run = download_open_destination(&w, bell_input(&w)?, first, attempts, RunMode::EnumerateAll)?;
        return Ok(vec![run.success_probability(), 0.0, exact]);
    }
    let input = bell_input(&w)?;
    let mut hits = 0u64;
    for seed in trial_seeds(ctx) {
        let run = download_open_destination(&w, input.clone(), first, attempts, RunMode::Sample { seed })?;
        hits += u64::from(run.successes().next().is_some());
    }
    let t = ctx.trials as f64;
    let p = hits as f64 / t;
    Ok(vec![p, (p * (1.0 - p) / t).sqrt(), exact])
}

fn logical_ghz(pt: &Point, _: &RunContext) -> Result<Vec<f64>> {
    let n = pt.count("n")?;
    let encoding = match pt.text("encoding")? {
        "dicke" => Encoding::Dicke(code(pt)?),
        "concat" => Encoding::Concat(ConcatDickeCode::new(code(pt)?, pt.count("blocks")?)?),
        "graph" => Encoding::Graph { edges: (1..n).map(|v| (v, v + 1)).collect(), n },
        _ => Encoding::Ghz(n),
    };
    let regions = pt.count("regions")?;
    if regions < 2 {
        return Err(Error::InvalidParameter("logical-ghz needs at least 2 regions".into()));
    }
    let net = LogicalNetwork::new(NetworkSpec { encoding, resource: LogicalResource::Ghz, regions, levels: 2 })?;
    let state = net.build_logical_resource()?;
    let (a, b) = (0, regions - 1);
    let want = logical_bell(&net, a, b)?;
    let branches = ghz_to_bell(&net, &state, a, b)?;
    let mut worst = f64::INFINITY;
    for br in &branches {
        worst = worst.min(br.state.fidelity(&want)?);
    }
    let total: f64 = branches.iter().map(|b| b.probability).sum();
    Ok(vec![worst, total, branches.len() as f64])
}

fn merge_ghz(pt: &Point, _: &RunContext) -> Result<Vec<f64>> {
    let (count, len) = (pt.count("wires")?, pt.count("len")?);
    let hub = match pt.int("hub")? {
        0 => false,
        1 => true,
        h => return Err(Error::InvalidParameter(format!("hub must be 0 or 1, got {h}"))),
    };
    let w = PeriodWire::new(pt.tau()?, std::f64::consts::PI, len)?;
    let wires = vec![w; count];
    let run = merge_star(&wires, hub, RunMode::EnumerateAll)?;
    let mut worst = f64::INFINITY;
    let mut qubits = 0;
    for b in run.successes() {
        let sites = &b.localized;
        qubits = sites.len();
        let state = b.result.as_ref().ok_or_else(|| Error::Precondition("branch without state".into()))?;
        worst = worst.min(state.reduced(sites)?.fidelity(&ghz(sites)?)?);
    }
    Ok(vec![worst, run.success_probability(), qubits as f64])
}
