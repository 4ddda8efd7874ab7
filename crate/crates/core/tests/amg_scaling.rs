use std::sync::Arc;

use trellis::amg::{AmgConfig, Hierarchy};
use trellis::harness::gen_poisson_2d;
use trellis::krylov::{cg, SolverOptions};
use trellis::{launch, MultiVector};

fn cg_iterations(nx: u64, ranks: usize, amg: bool) -> usize {
    let out = launch(ranks, move |c| {
        let p = gen_poisson_2d(nx, nx, c)?;
        let opts = SolverOptions {
            rtol: 1e-8,
            max_iterations: 5000,
            ..Default::default()
        };
        let mut x = MultiVector::zeros(p.a.row_map(), 1);
        let rep = if amg {
            let h = Hierarchy::setup(Arc::clone(&p.a), &AmgConfig::default())?;
            cg(&*p.a, Some(&h), &p.b, &mut x, &opts)?
        } else {
            cg(&*p.a, None, &p.b, &mut x, &opts)?
        };
        assert!(rep.converged());
        Ok(rep.iterations)
    })
    .unwrap();
    out[0]
}

#[test]
fn amg_iterations_are_mesh_independent() {
    let its: Vec<usize> = [32, 64, 128].iter().map(|&n| cg_iterations(n, 4, true)).collect();
    let max = *its.iter().max().unwrap() as f64;
    let min = *its.iter().min().unwrap() as f64;
    assert!(its.iter().all(|&k| k <= 30), "{its:?}");
    assert!(max / min <= 1.5, "{its:?}");
}
