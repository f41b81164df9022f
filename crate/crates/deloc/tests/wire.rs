use std::f64::consts::PI;

use deloc::qcore::{cr, pauli, C64};
use deloc::wire::*;
use nalgebra::{DMatrix, Matrix2, Vector2};
use proptest::prelude::*;

/// Amplitudes ⟨s_n|A[s_{n−1}]⋯A[s_1]|+⟩ evaluated one bit string at a time.
fn string_oracle(w: &PeriodWire) -> Vec<C64> {
    let n = w.n();
    let a = w.tensors().a;
    let mut amps: Vec<C64> = (0..1usize << n)
        .map(|idx| {
            let mut v = w.left();
            for s in 1..n {
                v = a[(idx >> (s - 1)) & 1] * v;
            }
            v[(idx >> (n - 1)) & 1]
        })
        .collect();
    let norm = amps.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|x| *x /= norm);
    amps
}

fn phi_grid() -> impl Strategy<Value = f64> {
    (0..=6u32).prop_map(|k| k as f64 * PI / 6.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn wire_state_matches_string_oracle(tau in 2..=8u32, phi in phi_grid(), n in 1..=10usize) {
        let w = PeriodWire::new(tau, phi, n).unwrap();
        let s = build_wire_state(&w).unwrap();
        for (x, y) in s.amplitudes().iter().zip(string_oracle(&w)) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn isometry_and_r1(tau in 2..=12u32, phi in 0.0..=PI) {
        let w = PeriodWire::new(tau, phi, 3).unwrap();
        let t = w.tensors();
        prop_assert!(t.isometry_defect() < 1e-12);
        let cb = canonical_form(&t).unwrap();
        prop_assert!((cb.r1.norm() - (phi / 2.0).cos()).abs() < 1e-10);
        prop_assert!((cb.r0.powi(2) + cb.r1.norm_sqr() - 1.0).abs() < 1e-10);
        let tm = transfer_matrix(&t);
        prop_assert!(tm.eigenvalues.iter().all(|l| l.norm() <= 1.0 + 1e-10));
    }

    #[test]
    fn mpo_matches_dense(tau in 2..=6u32, phi in phi_grid(), n in 3..=9usize, a in 1..=9usize, b in 1..=9usize) {
        prop_assume!(a <= n && b <= n && a != b);
        let w = PeriodWire::new(tau, phi, n).unwrap();
        let chain = w.chain();
        let pure = build_wire_state(&w).unwrap();
        let bell = aux_bell_wire_state(&w, 0).unwrap();
        let got = reduced_density_mpo(&chain, &[a, b], LeftEnv::Pure).unwrap();
        prop_assert!(got.distance_max(&pure.reduced(&[a, b]).unwrap()).unwrap() < 1e-10);
        let got = reduced_density_mpo(&chain, &[a, b], LeftEnv::Mixed).unwrap();
        prop_assert!(got.distance_max(&bell.reduced(&[a, b]).unwrap()).unwrap() < 1e-10);
        let got = reduced_density_mpo(&chain, &[b], LeftEnv::Aux(0)).unwrap();
        prop_assert!(got.distance_max(&bell.reduced(&[0, b]).unwrap()).unwrap() < 1e-10);
    }

    #[test]
    fn pauli_errors_propagate_into_correlation_space(tau in 2..=8u32, n in 3..=12usize, q in 1..=11usize) {
        prop_assume!(q < n);
        let chain = PeriodWire::new(tau, PI, n).unwrap().chain();
        let s = chain.state().unwrap();
        let (x, z) = (pauli::x(), pauli::z());
        let ci = cr(0.0) + C64::i();
        let cases: [(Matrix2<C64>, Box<dyn Fn(&Matrix2<C64>) -> Matrix2<C64>>); 3] = [
            (z, Box::new(move |a| a * z)),
            (x, Box::new(move |a| x * a * x)),
            (pauli::y(), Box::new(move |a| x * a * z * x * ci)),
        ];
        for (err, map) in cases {
            let hit = s.apply_1q(q, &err).unwrap();
            let mapped = chain.state_with_site_map(q, map).unwrap();
            prop_assert!((hit.fidelity(&mapped).unwrap() - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn z_and_x_maps_are_exact_equalities() {
    let chain = PeriodWire::new(5, PI, 8).unwrap().chain();
    let s = chain.state().unwrap();
    for q in 1..8 {
        let z = pauli::z();
        let x = pauli::x();
        let a = s.apply_1q(q, &z).unwrap();
        let b = chain.state_with_site_map(q, |m| m * z).unwrap();
        assert!((a.amplitudes() - b.amplitudes()).norm() < 1e-12);
        let a = s.apply_1q(q, &x).unwrap();
        let b = chain.state_with_site_map(q, |m| x * m * x).unwrap();
        assert!((a.amplitudes() - b.amplitudes()).norm() < 1e-12);
    }
}

fn bloch(theta: f64, alpha: f64) -> Vector2<C64> {
    Vector2::new(cr((theta / 2.0).cos()), C64::from_polar((theta / 2.0).sin(), alpha))
}

#[test]
fn r1_zero_bulk_is_maximally_mixed() {
    let half = DMatrix::from_diagonal_element(2, 2, cr(0.5));
    for k in 0..20 {
        let theta = k as f64 * PI / 19.0;
        for alpha in [0.0, 0.7, 2.5] {
            let phi0 = bloch(theta, alpha);
            let phi1 = Vector2::new(-phi0[1].conj(), phi0[0].conj());
            let t = WireTensors::canonical(1.0, cr(0.0), phi0, phi1).unwrap();
            let cb = canonical_form(&t).unwrap();
            assert!(cb.r1.norm() < 1e-10);
            let chain = Chain::new(t, 10, deloc::qcore::ket_plus()).unwrap();
            let dense = chain.state().unwrap();
            for site in 2..10 {
                let rho = reduced_density_mpo(&chain, &[site], LeftEnv::Pure).unwrap();
                assert!((rho.matrix() - &half).norm() < 1e-10, "theta {theta} site {site}");
                assert!((dense.reduced(&[site]).unwrap().matrix() - &half).norm() < 1e-10);
            }
        }
    }
}

/// Norm of ρ(i, i+d) − ρ(i)⊗ρ(i+d).
fn connected(chain: &Chain, i: usize, d: usize) -> f64 {
    let pair = reduced_density_mpo(chain, &[i, i + d], LeftEnv::Pure).unwrap();
    let a = reduced_density_mpo(chain, &[i], LeftEnv::Pure).unwrap();
    let b = reduced_density_mpo(chain, &[i + d], LeftEnv::Pure).unwrap();
    // first label is the low bit, so the product reads ρ(i+d) ⊗ ρ(i)
    (pair.matrix() - b.matrix().kronecker(a.matrix())).norm()
}

#[test]
fn correlation_length_matches_correlator_fit() {
    for (tau, phi) in [(3u32, PI / 2.0), (4, PI / 2.0), (5, 2.0)] {
        let w = PeriodWire::new(tau, phi, 40).unwrap();
        let xi = correlation_length(&transfer_matrix(&w.tensors()));
        let chain = w.chain();
        let pts: Vec<(f64, f64)> = (1..=24).map(|d| (d as f64, connected(&chain, 10, d).ln())).collect();
        let m = pts.len() as f64;
        let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / m, pts.iter().map(|p| p.1).sum::<f64>() / m);
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let fit = -sxx / sxy;
        assert!((fit - xi).abs() / xi < 0.15, "tau {tau} phi {phi}: fit {fit} vs xi {xi}");
    }
    let chain = PeriodWire::new(4, PI, 16).unwrap().chain();
    for d in 2..10 {
        assert!(connected(&chain, 4, d) < 1e-10);
    }
    let chain = PeriodWire::new(2, 1.0, 30).unwrap().chain();
    let (near, far) = (connected(&chain, 5, 2), connected(&chain, 5, 20));
    assert!((near - far).abs() < 1e-9 && near > 0.1);
}

#[test]
fn logical_bell_wires() {
    let w = PeriodWire::new(4, PI, 5).unwrap();
    let s = logical_bell_wire_state(&w, &w).unwrap();
    assert_eq!(s.labels().len(), 10);
    let left: Vec<usize> = (1..=5).collect();
    assert!((s.reduced(&left).unwrap().von_neumann_entropy() - 1.0).abs() < 1e-10);
    let aux = aux_bell_wire_state(&w, 0).unwrap();
    assert!((aux.reduced(&[0]).unwrap().von_neumann_entropy() - 1.0).abs() < 1e-10);
}
