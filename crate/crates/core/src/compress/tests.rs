use nalgebra::{Complex, DMatrix};
use num_complex::Complex64;

use super::*;
use crate::circuit::{haar_unitary4, kron2, unitarity_error4, Mat4};
use crate::exact::diagonalize;
use crate::model::{build_hamiltonian, ModelSpec};
use crate::rng::stream_rng;

fn c(x: f64) -> Complex64 {
    Complex::new(x, 0.0)
}

fn random_ansatz(sites: usize, n_layers: usize, seed: u64) -> BrickwallAnsatz {
    let mut rng = stream_rng(seed, 0);
    let layers = (0..n_layers)
        .map(|l| layer_bonds(sites, l).map(|_| haar_unitary4(&mut rng)).collect())
        .collect();
    BrickwallAnsatz::from_layers(sites, layers).unwrap()
}

fn random_target(sites: usize, seed: u64) -> (DMatrix<Complex64>, Target) {
    let u = random_ansatz(sites, 4, seed + 1000).to_matrix().unwrap();
    let t = Target::dense(&u).unwrap();
    (u, t)
}

fn hermitian(seed: u64) -> Mat4 {
    let a = haar_unitary4(&mut stream_rng(seed, 1));
    let b = haar_unitary4(&mut stream_rng(seed, 2));
    let m = a + b * c(0.3);
    (m + m.adjoint()) * c(0.5)
}

#[test]
fn cost_zero_at_target_and_phase_law() {
    let w = random_ansatz(4, 3, 1);
    let u = w.to_matrix().unwrap();
    assert!(cost(&Target::dense(&u).unwrap(), &w).unwrap().abs() < 1e-12);
    let phi = 0.7;
    let shifted = u.map(|z| z * Complex64::from_polar(1.0, -phi));
    let got = cost(&Target::dense(&shifted).unwrap(), &w).unwrap();
    assert!((got - (1.0 - phi.cos())).abs() < 1e-12);
}

#[test]
fn single_gate_cost_matches_trace() {
    let mut rng = stream_rng(3, 0);
    let u = haar_unitary4(&mut rng);
    let g = haar_unitary4(&mut rng);
    let w = BrickwallAnsatz::from_layers(2, vec![vec![g]]).unwrap();
    let ud = DMatrix::from_fn(4, 4, |i, j| u[(i, j)]);
    let want = 1.0 - (u.adjoint() * g).trace().re / 4.0;
    assert!((cost(&Target::dense(&ud).unwrap(), &w).unwrap() - want).abs() < 1e-14);

    let e = gate_environment(&Target::dense(&ud).unwrap(), &w, 0, 0).unwrap();
    assert!(((e.adjoint() * g).trace() - (u.adjoint() * g).trace()).norm() < 1e-13);
    let self_target = Target::dense(&DMatrix::from_fn(4, 4, |i, j| g[(i, j)])).unwrap();
    let e = gate_environment(&self_target, &w, 0, 0).unwrap();
    assert!(((e.adjoint() * g).trace() - c(4.0)).norm() < 1e-13);
}

#[test]
fn environments_reproduce_recontraction() {
    for (sites, seed) in [(3, 5u64), (4, 6), (5, 7)] {
        let (_, target) = random_target(sites, seed);
        let w = random_ansatz(sites, 4, seed);
        let (overlap, envs) = target.overlap_and_environments(&w).unwrap();
        assert!((overlap - target.overlap(&w).unwrap()).norm() < 1e-12);
        let mut rng = stream_rng(seed, 9);
        for l in 0..w.n_layers() {
            for (j, e) in envs[l].iter().enumerate() {
                let g = w.gate(l, j).unwrap();
                assert!(((e.adjoint() * g).trace() - overlap).norm() < 1e-12);
                let other = haar_unitary4(&mut rng);
                let mut w2 = w.clone();
                w2.set_gate(l, j, other).unwrap();
                assert!(((e.adjoint() * other).trace() - target.overlap(&w2).unwrap()).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn environment_first_order_in_perturbation() {
    let (_, target) = random_target(4, 11);
    let w = random_ansatz(4, 3, 11);
    let e = gate_environment(&target, &w, 1, 0).unwrap();
    let g = *w.gate(1, 0).unwrap();
    let dir = g * hermitian(4) * Complex::new(0.0, 1.0);
    let h = 1e-6;
    let mut w2 = w.clone();
    w2.set_gate(1, 0, g + dir * c(h)).unwrap();
    let base = target.overlap(&w).unwrap();
    let moved = target.overlap(&w2).unwrap();
    let lin = (e.adjoint() * dir).trace() * c(h);
    assert!(((moved - base) - lin).norm() <= 1e-6 * lin.norm());
}

#[test]
fn gradient_stationary_and_orthogonal() {
    let g = haar_unitary4(&mut stream_rng(12, 0));
    let d = 16.0;
    let grad = riemannian_gradient(&g, &(-g * c(d)), d).unwrap();
    assert!(grad.norm() < 1e-14);

    let e = haar_unitary4(&mut stream_rng(12, 1)) * c(3.0);
    let grad = riemannian_gradient(&g, &e, d).unwrap();
    let inner = g.adjoint() * grad;
    assert!((inner + inner.adjoint()).norm() < 1e-12);
    for k in 0..5 {
        let normal = g * hermitian(20 + k);
        assert!((grad.adjoint() * normal).trace().re.abs() < 1e-12);
    }
    assert!(riemannian_gradient(&(g * c(2.0)), &e, d).is_err());
}

#[test]
fn retraction_properties() {
    let g = haar_unitary4(&mut stream_rng(13, 0));
    let xi = g * hermitian(13) * Complex::new(0.0, 1.0);
    assert_eq!(retract(&g, &xi, 0.0).unwrap(), g);
    for step in [1e-3, 0.1, 1.0, 10.0] {
        assert!(unitarity_error4(&retract(&g, &xi, step).unwrap()) < 1e-13);
    }
    assert!(retract(&g, &g, 0.1).is_err());

    let z = Mat4::from_diagonal(&nalgebra::Vector4::new(c(1.0), c(-1.0), c(1.0), c(-1.0)));
    let iz = z * Complex::new(0.0, 1.0);
    for s in [1e-2_f64, 0.5, 3.0] {
        let a = s.atan();
        let polar = Mat4::from_diagonal(&nalgebra::Vector4::new(
            Complex64::from_polar(1.0, a),
            Complex64::from_polar(1.0, -a),
            Complex64::from_polar(1.0, a),
            Complex64::from_polar(1.0, -a),
        ));
        let err = (retract(&Mat4::identity(), &iz, s).unwrap() - polar).norm();
        assert!(err < 1e-14, "s={s} err={err}");
    }
}

#[test]
fn directional_derivative_matches_finite_differences() {
    for seed in 0..6u64 {
        let sites = if seed % 2 == 0 { 2 } else { 4 };
        let (_, target) = random_target(sites, 40 + seed);
        let w = random_ansatz(sites, 3, 40 + seed);
        let d = target.dim();
        let (_, envs) = target.overlap_and_environments(&w).unwrap();
        let dirs: Vec<Vec<Mat4>> = w
            .layers()
            .iter()
            .enumerate()
            .map(|(l, layer)| layer.iter().enumerate().map(|(j, g)| g * hermitian(100 * seed + 10 * l as u64 + j as u64) * Complex::new(0.0, 1.0)).collect())
            .collect();
        let mut analytic = 0.0;
        for l in 0..w.n_layers() {
            for (j, g) in w.layers()[l].iter().enumerate() {
                let grad = riemannian_gradient(g, &envs[l][j], d).unwrap();
                analytic += (grad.adjoint() * dirs[l][j]).trace().re;
            }
        }
        let along = |s: f64| {
            let layers = w
                .layers()
                .iter()
                .zip(&dirs)
                .map(|(layer, dl)| layer.iter().zip(dl).map(|(g, x)| retract(g, x, s).unwrap()).collect())
                .collect();
            cost(&target, &BrickwallAnsatz::from_layers(sites, layers).unwrap()).unwrap()
        };
        let h = 1e-4;
        let fd = (along(h) - along(-h)) / (2.0 * h);
        assert!((fd - analytic).abs() <= 1e-5 * analytic.abs().max(1e-3), "seed {seed}: {fd} vs {analytic}");
    }
}

#[test]
fn optimizer_returns_immediately_at_target() {
    let w = random_ansatz(4, 3, 21);
    let target = Target::dense(&w.to_matrix().unwrap()).unwrap();
    let res = optimize(&target, &w, &OptimizeOptions { cost_tol: 1e-12, ..Default::default() }).unwrap();
    assert_eq!(res.iterations(), 0);
    assert!(res.final_cost() <= 1e-12);
}

#[test]
fn optimizer_improves_trotter_start_monotonically() {
    let spec = ModelSpec::new(4, 1.0, 3.0).unwrap();
    let eig = diagonalize(&build_hamiltonian(&spec).unwrap()).unwrap();
    let target = dense_target_from(&eig, 0.4).unwrap();
    let init = trotter_init(&spec, 0.4, 5).unwrap();
    let opts = OptimizeOptions { max_iters: 100, ..Default::default() };
    let res = optimize(&target, &init, &opts).unwrap();
    assert!(res.final_cost() < res.trace[0].cost);
    assert!(res.trace.windows(2).all(|p| p[1].cost < p[0].cost));
    assert!(res.max_unitarity_error < 1e-13);
    let mut buf = Vec::new();
    res.write_trace_csv(&mut buf).unwrap();
    assert!(buf.starts_with(b"iter,cost,grad_norm,step\n0,"));
}

#[test]
fn trotter_init_shapes_and_accuracy() {
    let spec = ModelSpec::new(2, 1.0, 3.0).unwrap();
    let eig = diagonalize(&build_hamiltonian(&spec).unwrap()).unwrap();
    let w = trotter_init(&spec, 1.3, 3).unwrap();
    assert!(cost(&dense_target_from(&eig, 1.3).unwrap(), &w).unwrap().abs() < 1e-13);

    let spec = ModelSpec::new(6, 1.0, 3.0).unwrap();
    let eig = diagonalize(&build_hamiltonian(&spec).unwrap()).unwrap();
    let target = dense_target_from(&eig, 0.5).unwrap();
    let coarse = cost(&target, &trotter_init(&spec, 0.5, 3).unwrap()).unwrap();
    let fine = cost(&target, &trotter_init(&spec, 0.5, 9).unwrap()).unwrap();
    assert!(fine < coarse / 4.0, "{fine} vs {coarse}");
    for n in 1..=6 {
        let w = trotter_init(&spec, 0.5, n).unwrap();
        assert_eq!(w.n_layers(), n);
        assert_eq!(w.num_gates(), (0..n).map(|l| layer_bonds(6, l).count()).sum::<usize>());
    }
    assert!(trotter_init(&spec, 0.5, 0).is_err());
    let zero = trotter_init(&spec, 0.0, 9).unwrap();
    assert!(zero.layers().iter().flatten().all(|g| (g - Mat4::identity()).norm() < 1e-15));
}

#[test]
fn mpo_and_dense_paths_agree() {
    let spec = ModelSpec::new(6, 1.0, 3.0).unwrap();
    let eig = diagonalize(&build_hamiltonian(&spec).unwrap()).unwrap();
    let t = 0.3;
    let dense = dense_target_from(&eig, t).unwrap();
    let mpo = target_operator(&spec, t, TargetMode::Mpo, &MpoOptions::default()).unwrap();
    let w = trotter_init(&spec, t, 5).unwrap();
    let dc = (cost(&dense, &w).unwrap() - cost(&mpo, &w).unwrap()).abs();
    assert!(dc < 1e-8, "cost diff {dc:e}");
    let (_, ed) = dense.overlap_and_environments(&w).unwrap();
    let (_, em) = mpo.overlap_and_environments(&w).unwrap();
    for (a, b) in ed.iter().flatten().zip(em.iter().flatten()) {
        assert!((a - b).norm() / 64.0 < 1e-8, "env diff {:e}", (a - b).norm());
    }
}

#[test]
fn ansatz_validation_and_round_trip() {
    let w = random_ansatz(5, 4, 31);
    let back = BrickwallAnsatz::from_circuit(&crate::circuit::parse_circuit(&crate::circuit::write_circuit(&w.to_circuit())).unwrap()).unwrap();
    assert!(back.layers().iter().flatten().zip(w.layers().iter().flatten()).all(|(a, b)| (a - b).norm() < 1e-15));
    assert!(BrickwallAnsatz::from_layers(5, vec![vec![Mat4::identity()]]).is_err());
    let bad = kron2(&crate::circuit::rx(0.1), &crate::circuit::rx(0.2)) * c(1.01);
    assert!(BrickwallAnsatz::from_layers(2, vec![vec![bad]]).is_err());
    assert!(w.gate(9, 0).is_err());
    let padded = w.padded(7);
    assert_eq!(padded.n_layers(), 7);
    assert!((padded.to_matrix().unwrap() - w.to_matrix().unwrap()).norm() < 1e-12);
}

#[test]
fn schedule_rules() {
    let s = LayerSchedule::default();
    assert_eq!(s.layers_for(0.0), 9);
    assert_eq!(s.layers_for(3.0), 9);
    assert_eq!(s.layers_for(3.1), 17);
    assert_eq!(s.layers_for(50.0), 41);
    assert!(LayerSchedule::new(vec![(2.0, 9), (2.0, 17)]).is_err());
    assert!(LayerSchedule::new(vec![(2.0, 17), (4.0, 9)]).is_err());
    assert!(LayerSchedule::new(vec![]).is_err());
}

#[test]
fn compressed_series_tracks_exact_for_short_times() {
    let spec = ModelSpec::new(4, 1.0, 3.0).unwrap();
    let p = "UDDU".parse().unwrap();
    let opts = CompressOptions { schedule: LayerSchedule::constant(5), ..Default::default() };
    let run = run_compressed_series(&spec, &p, 0.2, 1.0, &opts, None).unwrap();
    let exact = crate::exact::run_exact_series(&spec, &p, 0.2, 1.0).unwrap();
    assert!((run.series.values[0] + 1.0).abs() < 1e-12);
    for (pt, (a, b)) in run.points.iter().zip(run.series.values.iter().zip(&exact.values)) {
        assert!((a - b).abs() <= 2.0 * (2.0 * pt.cost.max(0.0)).sqrt() + 1e-9, "t={} {a} {b} cost {}", pt.t, pt.cost);
    }
}
