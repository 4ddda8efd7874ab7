use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trellis::harness::{gen_convection_diffusion_2d, gen_poisson_2d};
use trellis::krylov::*;
use trellis::smoothers::{Ilu, Relaxation, RelaxationConfig, RelaxationKind};
use trellis::{launch, Comm, CsrMatrix, Map, MultiVector};

const KINDS: [SolverKind; 5] = [
    SolverKind::Cg,
    SolverKind::Gmres,
    SolverKind::BiCgStab,
    SolverKind::PseudoBlockCg,
    SolverKind::FixedPoint,
];

fn spd_triplets(seed: u64, n: u64) -> Vec<(u64, u64, f64)> {
    // B + Bᵀ plus a dominant diagonal
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 8.0 + rng.gen_range(0.0..4.0)));
        for _ in 0..3 {
            let j = rng.gen_range(0..n);
            let v = rng.gen_range(-1.0..1.0);
            t.push((i, j, v));
            t.push((j, i, v));
        }
    }
    t
}

fn true_residual(a: &CsrMatrix, b: &MultiVector, x: &MultiVector) -> f64 {
    let mut r = b.clone();
    a.apply(x, &mut r, -1.0, 1.0).unwrap();
    r.norm2().unwrap()[0] / b.norm2().unwrap()[0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gmres_history_never_grows_within_a_cycle(seed in 0u64..10_000, restart in 1usize..12) {
        let rep = launch(3, |c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 40u64;
            let mut t: Vec<_> = (0..n).map(|i| (i, i, 2.0)).collect();
            for _ in 0..200 {
                t.push((rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(-1.0..1.0)));
            }
            let map = Map::contiguous(n, c);
            let a = CsrMatrix::from_triplets(&map, &map, &t)?;
            let b = MultiVector::from_fn(&map, 1, |g, _| (g as f64 + 0.5).cos());
            let mut x = MultiVector::zeros(&map, 1);
            let opts = SolverOptions { rtol: 1e-10, max_iterations: 120, restart, ..Default::default() };
            gmres(&a, None, &b, &mut x, &opts)
        })
        .unwrap()
        .remove(0);
        let mut ends = rep.cycle_starts[1..].to_vec();
        ends.push(rep.history.len() - 1);
        for (&s, &e) in rep.cycle_starts.iter().zip(&ends) {
            prop_assert!(rep.history[s..=e].windows(2).all(|w| w[1] <= w[0]), "{:?}", rep.history);
        }
    }

    /// The k-iteration CG run reproduces the k-th iterate, so the error
    /// in the A-norm can be tracked against a dense direct solve.
    #[test]
    fn cg_error_decreases_in_energy_norm(seed in 0u64..10_000) {
        let n = 30u64;
        let t = spd_triplets(seed, n);
        let mut dense = DMatrix::<f64>::zeros(n as usize, n as usize);
        for &(i, j, v) in &t {
            dense[(i as usize, j as usize)] += v;
        }
        let bv = DVector::from_fn(n as usize, |i, _| (i as f64 * 0.3).sin() + 0.1);
        let exact = dense.clone().lu().solve(&bv).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..15 {
            let x = launch(2, |c| {
                let map = Map::contiguous(n, c);
                let a = CsrMatrix::from_triplets(&map, &map, &t)?;
                let b = MultiVector::from_fn(&map, 1, |g, _| bv[g as usize]);
                let mut x = MultiVector::zeros(&map, 1);
                let opts = SolverOptions { rtol: 1e-15, max_iterations: k, ..Default::default() };
                cg(&a, None, &b, &mut x, &opts)?;
                x.gather_global()
            })
            .unwrap()
            .remove(0)
            .remove(0);
            let e = DVector::from_vec(x) - &exact;
            let energy = e.dot(&(&dense * &e)).sqrt();
            prop_assert!(energy < prev || energy <= 1e-12 * exact.norm(), "k = {}: {} vs {}", k, energy, prev);
            prev = energy;
        }
    }

    /// Wrapping the matrix in a closure changes nothing about the run.
    /// Jacobi keeps the Richardson iteration convergent.
    #[test]
    fn matrix_free_path_is_identical(seed in 0u64..10_000, which in 0usize..5) {
        let kind = KINDS[which];
        let out = launch(2, |c| {
            let map = Map::contiguous(25, c);
            let a = std::sync::Arc::new(CsrMatrix::from_triplets(&map, &map, &spd_triplets(seed, 25))?);
            let m = Relaxation::new(a.clone(), RelaxationConfig::default())?;
            let b = MultiVector::from_fn(&map, 1, |g, _| 1.0 + g as f64 * 0.01);
            let op = FnOperator::new(&map, &map, |x: &MultiVector, y: &mut MultiVector| a.apply(x, y, 1.0, 0.0));
            let solver = Solver { kind, options: SolverOptions { rtol: 1e-10, max_iterations: 300, ..Default::default() } };
            let (mut x1, mut x2) = (MultiVector::zeros(&map, 1), MultiVector::zeros(&map, 1));
            let r1 = solver.solve(&*a, Some(&m), &b, &mut x1)?;
            let r2 = solver.solve(&op, Some(&m), &b, &mut x2)?;
            Ok((r1.history == r2.history, x1.col(0) == x2.col(0), r1.converged()))
        })
        .unwrap();
        prop_assert!(out[0].0 && out[0].1 && out[0].2, "{:?}", kind);
    }
}

#[test]
fn identity_converges_in_one_iteration() {
    for kind in KINDS {
        let out = launch(3, |c| {
            let map = Map::contiguous(17, c);
            let t: Vec<_> = (0..17).map(|i| (i, i, 1.0)).collect();
            let a = CsrMatrix::from_triplets(&map, &map, &t)?;
            let m = Identity::new(&map);
            let b = MultiVector::from_fn(&map, 1, |g, _| g as f64 - 8.0);
            let mut x = MultiVector::zeros(&map, 1);
            let solver = Solver {
                kind,
                options: SolverOptions::default(),
            };
            let rep = solver.solve(&a, Some(&m), &b, &mut x)?;
            Ok((rep.converged(), rep.iterations))
        })
        .unwrap();
        assert_eq!(out[0], (true, 1), "{kind:?}");
    }
}

#[test]
fn solvers_on_poisson() {
    for kind in [SolverKind::Cg, SolverKind::Gmres, SolverKind::BiCgStab] {
        let out = launch(4, |c| {
            let p = gen_poisson_2d(20, 20, c)?;
            let m = Relaxation::new(
                p.a.clone(),
                RelaxationConfig {
                    kind: RelaxationKind::GaussSeidelSymmetric,
                    ..Default::default()
                },
            )?;
            let solver = Solver {
                kind,
                options: SolverOptions {
                    rtol: 1e-9,
                    ..Default::default()
                },
            };
            let mut x = MultiVector::zeros(p.a.row_map(), 1);
            let rep = solver.solve(&*p.a, Some(&m), &p.b, &mut x)?;
            let mut e = x.clone();
            e.axpy(-1.0, p.exact.as_ref().unwrap())?;
            Ok((rep.converged(), true_residual(&p.a, &p.b, &x), e.norm_inf()?[0]))
        })
        .unwrap();
        let (ok, res, err) = out[0];
        assert!(ok, "{kind:?}");
        assert!(res <= 1e-8, "{kind:?}: {res}");
        assert!(err <= 1e-6, "{kind:?}: {err}");
    }
}

#[test]
fn nonsymmetric_solvers_on_convection_diffusion() {
    for (kind, flexible) in [(SolverKind::Gmres, false), (SolverKind::Gmres, true), (SolverKind::BiCgStab, false)] {
        let out = launch(4, |c| {
            let p = gen_convection_diffusion_2d(24, 24, (1.0, -0.5), 0.02, c)?;
            let m = Ilu::new(p.a.clone(), 1)?;
            let solver = Solver {
                kind,
                options: SolverOptions {
                    rtol: 1e-9,
                    flexible,
                    ..Default::default()
                },
            };
            let mut x = MultiVector::zeros(p.a.row_map(), 1);
            let rep = solver.solve(&*p.a, Some(&m), &p.b, &mut x)?;
            Ok((rep.status, rep.iterations, true_residual(&p.a, &p.b, &x)))
        })
        .unwrap();
        let (status, it, res) = out[0];
        assert_eq!(status, SolveStatus::Converged, "{kind:?}");
        assert!(it < 200, "{kind:?}: {it}");
        assert!(res <= 1e-8, "{kind:?}: {res}");
    }
}

#[test]
fn two_by_two_cg() {
    let c = Comm::serial();
    let map = Map::contiguous(2, &c);
    let a = CsrMatrix::from_triplets(&map, &map, &[(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)]).unwrap();
    let b = MultiVector::from_local(&map, 1, vec![1.0, 2.0]).unwrap();
    let mut x = MultiVector::zeros(&map, 1);
    let rep = cg(&a, None, &b, &mut x, &SolverOptions::default()).unwrap();
    assert!(rep.iterations <= 2);
    assert!((x.col(0)[0] - 1.0 / 11.0).abs() <= 1e-12);
    assert!((x.col(0)[1] - 7.0 / 11.0).abs() <= 1e-12);
}

#[test]
fn restart_one_stagnates_while_thirty_converges() {
    let out = launch(2, |c| {
        let p = gen_poisson_2d(16, 16, c)?;
        let mut reps = Vec::new();
        for restart in [1, 30] {
            let mut x = MultiVector::zeros(p.a.row_map(), 1);
            let opts = SolverOptions {
                rtol: 1e-8,
                max_iterations: 300,
                restart,
                ..Default::default()
            };
            reps.push(gmres(&*p.a, None, &p.b, &mut x, &opts)?);
        }
        Ok(reps)
    })
    .unwrap();
    let reps = &out[0];
    assert_eq!(reps[0].status, SolveStatus::MaxIterations);
    assert!(reps[1].converged());
    for r in reps {
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }
}
