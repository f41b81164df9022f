use std::f64::consts::PI;

use deloc::protocols::*;
use deloc::qcore::{c, cr, ket_plus, phi_plus, pauli, KrausChannel, PureState, C64};
use deloc::wire::{Chain, PeriodWire};
use nalgebra::Vector2;

fn normalized(v: Vector2<C64>) -> Vector2<C64> {
    v / cr(v.norm())
}

/// Wire of `n` sites starting at `first`, left boundary `left`.
fn wire_state(w: &PeriodWire, left: Vector2<C64>, n: usize, first: usize) -> PureState {
    Chain::new(w.tensors(), n, normalized(left)).unwrap().state_at(first).unwrap()
}

fn psi() -> Vector2<C64> {
    normalized(Vector2::new(c(0.6, 0.1), c(-0.3, 0.7)))
}

#[test]
fn download_success_probability_and_fidelity() {
    for tau in 2..=5 {
        for k in 1..=6 {
            let phi = k as f64 * PI / 6.0;
            let w = PeriodWire::new(tau, phi, 2 * tau as usize + 3).unwrap();
            let run = download(&w, bell_input(&w).unwrap(), 2 * tau as usize + 1, RunMode::EnumerateAll).unwrap();
            assert!((run.total_probability() - 1.0).abs() < 1e-10);
            let want = 1.0 - (phi / 2.0).cos();
            assert!((run.success_probability() - want).abs() < 1e-10, "tau {tau} phi {phi}: {}", run.success_probability());
            for b in run.successes() {
                let t = b.localized[0];
                let f = b.result.as_ref().unwrap().reduced(&[REFERENCE, t]).unwrap().fidelity(&phi_plus(REFERENCE, t)).unwrap();
                assert!((f - 1.0).abs() < 1e-10, "tau {tau} phi {phi}: F={f}");
            }
        }
    }
}

#[test]
fn open_destination_probability() {
    let phi = PI / 2.0;
    for l in 1..=5 {
        let w = PeriodWire::new(3, phi, 4 + l + 2).unwrap();
        let run = download_open_destination(&w, bell_input(&w).unwrap(), 4, l, RunMode::EnumerateAll).unwrap();
        let want = 1.0 - (phi / 2.0).cos().powi(l as i32);
        assert!((run.success_probability() - want).abs() < 1e-10, "l {l}: {}", run.success_probability());
        for b in run.successes() {
            let t = b.localized[0];
            let f = b.result.as_ref().unwrap().reduced(&[REFERENCE, t]).unwrap().fidelity(&phi_plus(REFERENCE, t)).unwrap();
            assert!((f - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn transport_frame_matches_shorter_wire() {
    let w = PeriodWire::new(3, 2.0, 6).unwrap().with_left(psi()).unwrap();
    let run = transport(&w, w.chain().state().unwrap(), 3, RunMode::EnumerateAll).unwrap();
    assert!((run.total_probability() - 1.0).abs() < 1e-10);
    for b in &run.branches {
        let want = wire_state(&w, b.byproducts * psi(), 3, 4);
        assert!(b.result.as_ref().unwrap().fidelity(&want).unwrap() > 1.0 - 1e-10);
    }
}

#[test]
fn bell_upload_leaves_pauli_frame() {
    let w = PeriodWire::new(4, 2.2, 5).unwrap();
    let payload = PureState::product(vec![9], &[psi()]).unwrap();
    let run = upload_via_bell(&bell_input(&w).unwrap(), REFERENCE, &payload, RunMode::EnumerateAll).unwrap();
    assert_eq!(run.branches.len(), 4);
    for b in &run.branches {
        let want = wire_state(&w, b.byproducts * psi(), 5, 1);
        assert!(b.result.as_ref().unwrap().fidelity(&want).unwrap() > 1.0 - 1e-10);
    }
    let two = PureState::product(vec![9, 10], &[psi(), psi()]).unwrap();
    assert!(matches!(upload_via_bell(&bell_input(&w).unwrap(), REFERENCE, &two, RunMode::Reference), Err(deloc::Error::InvalidPayload(2))));
}

#[test]
fn node_upload_frame() {
    for phi in [PI, 2.0, 0.7] {
        let w = PeriodWire::new(3, phi, 5).unwrap();
        let run = upload_from_node(&w, node_input(&w, &psi()).unwrap(), 6, RunMode::EnumerateAll).unwrap();
        for b in run.successes() {
            let want = wire_state(&w, b.byproducts * psi(), 4, 2);
            assert!(b.result.as_ref().unwrap().fidelity(&want).unwrap() > 1.0 - 1e-10, "phi {phi}");
        }
        assert!(run.success_probability() > 0.0);
    }
}

#[test]
fn round_trip_is_perfect_at_maximal_entanglement() {
    for tau in 2..=5u32 {
        let steps = 2 * tau as usize;
        let w = PeriodWire::new(tau, PI, steps + 4).unwrap();
        let run = round_trip(&w, reference_input(&w).unwrap(), w.n() + 1, steps, RunMode::EnumerateAll).unwrap();
        assert!((run.success_probability() - 1.0).abs() < 1e-10);
        for b in run.successes() {
            let t = b.localized[0];
            let f = b.result.as_ref().unwrap().reduced(&[REFERENCE, t]).unwrap().fidelity(&phi_plus(REFERENCE, t)).unwrap();
            assert!((f - 1.0).abs() < 1e-10, "tau {tau}: {f}");
        }
    }
}

#[test]
fn z_error_fidelity() {
    for tau in 2..=4u32 {
        let steps = 2 * tau as usize;
        let w = error_test_wire(tau, PI / 3.0, steps).unwrap();
        for q in 1..=steps {
            let r = transport_with_error(&w, &ErrorModel::Pauli { site: q, op: pauli::z() }, steps, RunMode::EnumerateAll).unwrap();
            assert!((r.fidelity - 0.75).abs() < 1e-9, "tau {tau} q {q}: {}", r.fidelity);
            assert!(r.max_fidelity - r.min_fidelity < 1e-9);
        }
        let x = transport_with_error(&w, &ErrorModel::Pauli { site: 2, op: pauli::x() }, steps, RunMode::EnumerateAll).unwrap();
        assert!((x.fidelity - 1.0).abs() < 1e-10);
    }
    let w = error_test_wire(4, PI, 8).unwrap();
    let r = transport_with_error(&w, &ErrorModel::Pauli { site: 3, op: pauli::z() }, 8, RunMode::EnumerateAll).unwrap();
    assert!(r.fidelity < 1e-10);
}

#[test]
fn channel_error_mixes_components() {
    let w = error_test_wire(3, PI / 2.0, 6).unwrap();
    let ch = KrausChannel::phase_flip(0.3).unwrap();
    let r = transport_with_error(&w, &ErrorModel::Channel { site: 2, channel: ch }, 6, RunMode::EnumerateAll).unwrap();
    let fz = (PI / 4.0).cos().powi(2);
    assert!((r.fidelity - (0.7 + 0.3 * fz)).abs() < 1e-9, "{}", r.fidelity);
}

#[test]
fn single_loss_is_half_phase_flip() {
    for tau in [3u32, 4] {
        let steps = 2 * tau as usize;
        let w = error_test_wire(tau, PI, steps).unwrap();
        let r = transport_with_losses(&w, &[3], steps, RunMode::EnumerateAll).unwrap();
        assert!(!r.branches.is_empty());
        let flip = KrausChannel::phase_flip(0.5).unwrap().choi().unwrap();
        for b in &r.branches {
            assert_eq!(b.channel.rank, 2);
            let local = b.local_channel.as_ref().unwrap();
            let d = local.choi().unwrap().distance_max(&flip).unwrap();
            assert!(d < 1e-10, "tau {tau}: {d}");
        }
        assert!((r.fidelity - 0.5).abs() < 1e-10);
    }
}

#[test]
fn cut_splits_into_two_wires() {
    for phi in [PI, 2.5] {
        let w = PeriodWire::new(4, phi, 8).unwrap();
        let k = 3;
        let run = cut_wire(&w, bell_input(&w).unwrap(), k, RunMode::EnumerateAll).unwrap();
        assert!(run.success_probability() > 0.0);
        for b in run.successes() {
            let st = b.result.as_ref().unwrap();
            let mut keep = vec![REFERENCE];
            keep.extend(1..=k);
            let left = Chain::new(w.tensors(), k, ket_plus()).unwrap().logical_bell_state(REFERENCE).unwrap();
            let f = st.reduced(&keep).unwrap().fidelity(&left).unwrap();
            assert!((f - 1.0).abs() < 1e-10, "phi {phi}: {f}");
            if let Some((s, v)) = b.residual {
                let right = wire_state(&w, v, w.n() + 1 - s, s);
                let sites: Vec<_> = (s..=w.n()).collect();
                assert!((st.reduced(&sites).unwrap().fidelity(&right).unwrap() - 1.0).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn double_localization_gives_bell_pair() {
    for (tau, phi, k1, k2) in [(4u32, PI, 2, 6), (4, PI, 2, 5), (3, 2.0, 2, 5), (2, PI, 1, 4)] {
        let w = PeriodWire::new(tau, phi, k2 + 3).unwrap();
        let run = double_localization(&w, k1, k2, RunMode::EnumerateAll).unwrap();
        assert!(run.success_probability() > 0.0);
        for b in run.successes() {
            let f = b.result.as_ref().unwrap().reduced(&[k1, k2]).unwrap().fidelity(&phi_plus(k1, k2)).unwrap();
            assert!((f - 1.0).abs() < 1e-10, "{tau} {phi} {k1} {k2}: {f}");
        }
    }
}

#[test]
fn compensation_station() {
    assert_eq!(CompensationStation::offset(4, 2, 6), 0);
    let st = CompensationStation::new(vec![2]);
    assert_eq!(st.select(4, 1, 3).unwrap(), Some(2));
    assert!(matches!(st.select(4, 1, 2), Err(deloc::Error::StationInsufficient(3))));
    let w = PeriodWire::new(4, PI, 6).unwrap();
    let run = compensated_double_localization(&w, &st, 1, 3, RunMode::EnumerateAll).unwrap();
    for b in run.successes() {
        assert_eq!(b.notes["station_length"], 2.0);
        let f = b.result.as_ref().unwrap().reduced(&[1, 5]).unwrap().fidelity(&phi_plus(1, 5)).unwrap();
        assert!((f - 1.0).abs() < 1e-10);
    }
}

#[test]
fn merge_boundary_equals_single_wire() {
    for tau in [3u32, 4] {
        let w1 = PeriodWire::new(tau, PI, 3).unwrap();
        let w2 = PeriodWire::new(tau, PI, 4).unwrap();
        let run = merge_boundary(&w1, &w2, RunMode::EnumerateAll).unwrap();
        let single = PeriodWire::new(tau, PI, 6).unwrap().chain().state().unwrap().relabel(merged_labels(3, 4)).unwrap();
        for b in &run.branches {
            let f = b.result.as_ref().unwrap().fidelity(&single).unwrap();
            assert!((f - 1.0).abs() < 1e-10, "tau {tau}: {f}");
        }
    }
    let slack = PeriodWire::new(4, 2.0, 3).unwrap();
    assert!(matches!(merge_boundary(&slack, &slack, RunMode::Reference), Err(deloc::Error::Precondition(_))));
}

#[test]
fn star_merge_gives_ghz() {
    let wires: Vec<_> = (0..3).map(|_| PeriodWire::new(4, PI, 4).unwrap()).collect();
    for hub in [false, true] {
        let run = merge_star(&wires, hub, RunMode::EnumerateAll).unwrap();
        assert!((run.success_probability() - 1.0).abs() < 1e-10);
        for b in run.successes() {
            let sites = b.localized.clone();
            assert_eq!(sites.len(), if hub { 3 } else { 4 });
            let f = b.result.as_ref().unwrap().reduced(&sites).unwrap().fidelity(&ghz(&sites).unwrap()).unwrap();
            assert!((f - 1.0).abs() < 1e-10, "hub {hub}: {f}");
        }
    }
}

#[test]
fn sampling_is_reproducible() {
    let w = PeriodWire::new(3, 2.0, 8).unwrap();
    let a = download(&w, bell_input(&w).unwrap(), 4, RunMode::Sample { seed: 7 }).unwrap();
    let b = download(&w, bell_input(&w).unwrap(), 4, RunMode::Sample { seed: 7 }).unwrap();
    assert_eq!(a.branches.len(), 1);
    let outs = |r: &ProtocolRun| r.branches[0].steps.iter().map(|s| s.outcome).collect::<Vec<_>>();
    assert_eq!(outs(&a), outs(&b));
}

#[test]
fn correlation_space_loss_fidelity_matches_dense() {
    for (tau, phi) in [(4u32, PI), (6, PI), (3, 2.0), (4, PI / 2.0)] {
        for lost in [vec![1], vec![2], vec![1, 3], vec![1, 4], vec![2, 3, 5]] {
            let steps = lost.iter().max().unwrap() + 1;
            let w = error_test_wire(tau, phi, steps).unwrap();
            let dense = transport_with_losses(&w, &lost, steps, RunMode::EnumerateAll).unwrap().fidelity;
            let fast = loss_fidelity(&w, &lost).unwrap();
            assert!((dense - fast).abs() < 1e-10, "tau {tau} phi {phi} {lost:?}: {dense} vs {fast}");
            let dense = transport_with_losses(&w, &lost, steps, RunMode::Reference).unwrap().fidelity;
            let fast = loss_fidelity_reference(&w, &lost).unwrap();
            assert!((dense - fast).abs() < 1e-10, "reference, tau {tau} phi {phi} {lost:?}: {dense} vs {fast}");
        }
    }
}
