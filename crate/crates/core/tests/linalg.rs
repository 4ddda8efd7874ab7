use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trellis::linalg::{Pack, Unpack};
use trellis::{launch, CombineMode, CsrMatrix, ImportPlan, Map, MultiVector, ReduceOp};

struct Case {
    n: usize,
    triplets: Vec<(u64, u64, f64)>,
    x: Vec<f64>,
}

fn case(seed: u64, n: usize) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triplets = Vec::new();
    for i in 0..n as u64 {
        for _ in 0..rng.gen_range(1..6) {
            triplets.push((i, rng.gen_range(0..n as u64), rng.gen_range(-2.0..2.0)));
        }
    }
    let x = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Case { n, triplets, x }
}

fn owners(seed: u64, n: usize, p: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    (0..n).map(|_| rng.gen_range(0..p)).collect()
}

type Results = (Vec<f64>, Vec<f64>, f64, f64);

/// `A x`, dense `A²`, `x·Ax` and `‖x‖` with rows dealt out by `owner`.
fn kernels(c: &Case, owner: &[usize], p: usize) -> Results {
    launch(p, |comm| {
        let gids = (0..c.n as u64).filter(|&g| owner[g as usize] == comm.rank()).collect();
        let map = Map::from_owned(gids, comm)?;
        let a = CsrMatrix::from_triplets(&map, &map, &c.triplets)?;
        let x = MultiVector::from_fn(&map, 1, |g, _| c.x[g as usize]);
        let ax = a.mul_vec(&x)?;
        Ok((
            ax.gather_global()?.remove(0),
            a.multiply(&a)?.gather_dense()?,
            x.dot(&ax)?[0],
            x.norm2()?[0],
        ))
    })
    .unwrap()
    .remove(0)
}

fn agree(u: &[f64], v: &[f64]) -> bool {
    let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    u.iter().zip(v).all(|(a, b)| (a - b).abs() <= 1e-13 * scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kernels_are_partition_invariant(seed in 0u64..10_000, n in 1usize..60, p in 2usize..6) {
        let c = case(seed, n);
        let serial = kernels(&c, &vec![0; n], 1);
        let dist = kernels(&c, &owners(seed, n, p), p);
        prop_assert!(agree(&dist.0, &serial.0));
        prop_assert!(agree(&dist.1, &serial.1));
        prop_assert!((dist.2 - serial.2).abs() <= 1e-13 * serial.2.abs().max(1.0));
        prop_assert!((dist.3 - serial.3).abs() <= 1e-13 * serial.3);
    }

    /// Forward insert onto an overlapping map and reverse add back gives
    /// every entry times the number of ranks holding a copy.
    #[test]
    fn import_then_export_counts_copies(seed in 0u64..10_000, n in 1usize..100, p in 1usize..6) {
        let owner = owners(seed, n, p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let holds: Vec<Vec<bool>> = (0..p)
            .map(|r| (0..n).map(|g| owner[g] == r || rng.gen_bool(0.4)).collect())
            .collect();
        let copies: Vec<f64> = (0..n).map(|g| holds.iter().filter(|h| h[g]).count() as f64).collect();
        let out = launch(p, |c| {
            let gids = (0..n as u64).filter(|&g| owner[g as usize] == c.rank()).collect();
            let map = Map::from_owned(gids, c)?;
            // owned entries first, then the extra copies in descending order
            let mut tgt: Vec<u64> = map.gids().to_vec();
            tgt.extend((0..n as u64).rev().filter(|&g| holds[c.rank()][g as usize] && owner[g as usize] != c.rank()));
            let target = Map::overlapping(n as u64, tgt, c)?;
            let plan = ImportPlan::build(&map, &target)?;
            let x = MultiVector::from_fn(&map, 1, |g, _| (g as f64 + 1.0) * 0.5);
            let y = x.import(&plan, CombineMode::Insert)?;
            let mut back = MultiVector::zeros(&map, 1);
            y.export_into(&plan, &mut back, CombineMode::Add)?;
            back.gather_global()
        })
        .unwrap();
        for (g, v) in out[0][0].iter().enumerate() {
            prop_assert_eq!(*v, copies[g] * (g as f64 + 1.0) * 0.5);
        }
    }

    #[test]
    fn unpack_of_pack_is_identity(seed in 0u64..10_000, n in 1usize..40, ncols in 1usize..4) {
        let c = trellis::Comm::serial();
        let map = Map::contiguous(n as u64, &c);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals: Vec<f64> = (0..n * ncols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let src = MultiVector::from_local(&map, ncols, vals).unwrap();
        let lids: Vec<u32> = (0..n as u32).filter(|_| rng.gen_bool(0.5)).collect();
        let mut buf = Vec::new();
        src.pack(&lids, &mut buf);
        let mut dst = MultiVector::zeros(&map, ncols);
        dst.unpack(&lids, &buf, CombineMode::Insert).unwrap();
        for j in 0..ncols {
            for &l in &lids {
                prop_assert_eq!(dst.col(j)[l as usize], src.col(j)[l as usize]);
            }
        }
    }
}

#[test]
fn collectives_are_bitwise_reproducible() {
    let run = || {
        launch(7, |c| {
            let v: Vec<f64> = (0..5).map(|i| 0.1 * (c.rank() * 5 + i) as f64 + 1e-17).collect();
            let sum = c.all_reduce(&v, ReduceOp::Sum)?;
            let map = Map::contiguous(1000, c);
            let x = MultiVector::from_fn(&map, 1, |g, _| (g as f64).sin());
            Ok((sum, x.dot(&x)?[0], x.norm2()?[0]))
        })
        .unwrap()
    };
    let first = run();
    for _ in 0..5 {
        assert_eq!(run(), first);
    }
    assert!(first.iter().all(|r| *r == first[0]));
}
