use deloc::dicke::{dicke_state, ConcatDickeCode, DickeCode};
use deloc::lognet::*;
use deloc::protocols::RunMode;
use deloc::qcore::{cr, pauli, phi_plus, PureState, Site};
use nalgebra::DVector;

fn network(encoding: Encoding, resource: LogicalResource, regions: usize) -> LogicalNetwork {
    LogicalNetwork::new(NetworkSpec { encoding, resource, regions, levels: 2 }).unwrap()
}

fn dicke(n: usize, k1: usize, k2: usize) -> Encoding {
    Encoding::Dicke(DickeCode::new(n, k1, k2).unwrap())
}

fn shifted(s: &PureState, by: usize) -> PureState {
    s.relabel(s.labels().iter().map(|l| l + by).collect()).unwrap()
}

#[test]
fn dicke_ghz_matches_explicit_build() {
    let net = network(dicke(3, 0, 1), LogicalResource::Ghz, 3);
    let built = net.build_logical_resource().unwrap();
    let z = dicke_state(3, 0).unwrap();
    let o = dicke_state(3, 1).unwrap();
    let zzz = z.tensor(&shifted(&z, 3)).unwrap().tensor(&shifted(&z, 6)).unwrap();
    let ooo = o.tensor(&shifted(&o, 3)).unwrap().tensor(&shifted(&o, 6)).unwrap();
    let want = PureState::new(zzz.labels().to_vec(), zzz.amplitudes() + ooo.amplitudes()).unwrap();
    assert!((built.fidelity(&want).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn two_vertex_graph_is_logical_cz() {
    let net = network(dicke(2, 0, 2), LogicalResource::Graph(vec![(0, 1)]), 2);
    let built = net.build_logical_resource().unwrap();
    let s = cr(0.5);
    let plus = net.encode(&DVector::from_element(4, s), &[0, 1]).unwrap();
    // CZ_L = I on the codespace except |1_L1_L⟩ → −|1_L1_L⟩, assembled from the codewords.
    let one = net.codewords().one.amplitudes().clone();
    let d = one.len();
    let oo = DVector::from_fn(d * d, |i, _| one[i % d] * one[i / d]);
    let cz = nalgebra::DMatrix::identity(d * d, d * d) - &oo * oo.adjoint() * cr(2.0);
    let want = plus.apply_unitary(&[1, 2, 3, 4], &cz).unwrap();
    assert!((built.fidelity(&want).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn z_measurements_of_ghz_agree() {
    let net = network(Encoding::Ghz(2), LogicalResource::Ghz, 3);
    let mut st = net.build_logical_resource().unwrap();
    let (outs, leak) = logical_measure(&net, &st, 0, LogicalBasis::Z).unwrap();
    assert!(leak < 1e-12);
    let first = &outs[1];
    assert!((first.probability - 0.5).abs() < 1e-12);
    st = first.state.clone().unwrap();
    let (outs, _) = logical_measure(&net, &st, 1, LogicalBasis::Z).unwrap();
    assert!((outs[1].probability - 1.0).abs() < 1e-12);
}

#[test]
fn encoding_preserves_measurement_statistics() {
    let net = network(dicke(3, 1, 2), LogicalResource::Cluster, 3);
    let encoded = net.build_logical_resource().unwrap();
    let bare = network(Encoding::Ghz(1), LogicalResource::Cluster, 3);
    let plain = bare.build_logical_resource().unwrap();
    for basis in [LogicalBasis::X, LogicalBasis::Y, LogicalBasis::Z] {
        for r in 0..3 {
            let (a, _) = logical_measure(&net, &encoded, r, basis).unwrap();
            let (b, _) = logical_measure(&bare, &plain, r, basis).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x.probability - y.probability).abs() < 1e-12);
            }
        }
    }
}

fn bell_check(encoding: Encoding, regions: usize) {
    let net = network(encoding, LogicalResource::Ghz, regions);
    let st = net.build_logical_resource().unwrap();
    let (a, b) = (0, regions - 1);
    let want = logical_bell(&net, a, b).unwrap();
    let branches = ghz_to_bell(&net, &st, a, b).unwrap();
    let total: f64 = branches.iter().map(|b| b.probability).sum();
    assert!((total - 1.0).abs() < 1e-10);
    for br in branches {
        let f = br.state.fidelity(&want).unwrap();
        assert!((f - 1.0).abs() < 1e-10, "{:?}: {f}", br.outcomes);
    }
}

#[test]
fn ghz_to_bell_for_every_family() {
    bell_check(dicke(3, 0, 2), 4);
    bell_check(Encoding::Graph { edges: vec![(1, 2), (2, 3)], n: 3 }, 3);
    bell_check(Encoding::Concat(ConcatDickeCode::new(DickeCode::new(2, 0, 1).unwrap(), 2).unwrap()), 3);
}

#[test]
fn z_measurement_deletes_vertex() {
    let net = network(dicke(2, 0, 1), LogicalResource::Cluster, 3);
    let st = net.build_logical_resource().unwrap();
    let (outs, _) = logical_measure(&net, &st, 1, LogicalBasis::Z).unwrap();
    let s = cr(0.5);
    for o in outs {
        let mut want = net.encode(&DVector::from_element(4, s), &[0, 2]).unwrap();
        if o.outcome == 1 {
            want = net.apply_logical(&want, 0, &pauli::z()).unwrap();
            want = net.apply_logical(&want, 2, &pauli::z()).unwrap();
        }
        let f = o.state.unwrap().fidelity(&want).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }
}

fn download_stats(encoding: Encoding, target: Site) -> (f64, f64) {
    let net = network(encoding, LogicalResource::Ghz, 1);
    let st = net.codewords().bell_with(0).unwrap();
    let run = probabilistic_logical_download(&net, st, 0, target, RunMode::EnumerateAll).unwrap();
    assert!((run.total_probability() - 1.0).abs() < 1e-10);
    let mut worst: f64 = 1.0;
    for b in run.successes() {
        let f = b.result.as_ref().unwrap().reduced(&[0, target]).unwrap().fidelity(&phi_plus(0, target)).unwrap();
        worst = worst.min(f);
    }
    (run.success_probability(), worst)
}

#[test]
fn logical_download() {
    let (p, f) = download_stats(Encoding::Ghz(4), 2);
    assert!((p - 1.0).abs() < 1e-10 && (f - 1.0).abs() < 1e-10);
    let (p, f) = download_stats(dicke(3, 0, 2), 1);
    assert!(p < 1.0 - 1e-6 && p > 0.0, "{p}");
    assert!((f - 1.0).abs() < 1e-10);
    let (p, f) = download_stats(Encoding::Ghz(1), 1);
    assert!((p - 1.0).abs() < 1e-12 && (f - 1.0).abs() < 1e-12);
}

#[test]
fn qudits_and_oversized_graphs_rejected() {
    let spec = NetworkSpec { encoding: Encoding::Ghz(2), resource: LogicalResource::Ghz, regions: 2, levels: 4 };
    assert!(LogicalNetwork::new(spec).is_err());
    let spec = NetworkSpec { encoding: Encoding::Ghz(5), resource: LogicalResource::Cluster, regions: 2, levels: 2 };
    assert!(LogicalNetwork::new(spec).is_err());
}
