use nalgebra::DMatrix;
use proptest::prelude::*;

use mwg_core::concavity::build_h_from_precision;
use mwg_core::diagnostics::{autocovariance, iact};
use mwg_core::gmrf::{exp_cov_1d, GaussianTarget};
use mwg_core::io::{read_chain_csv, write_chain_csv};
use mwg_core::linalg::{spd_inverse, BandedCholesky, CsrMatrix};
use mwg_core::partition::BlockPartition;
use mwg_core::samplers::{block_update, chain_rng, draw_normals, ChainState};
use mwg_core::target::Preconditioner;

fn spd(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = chain_rng(seed, 0);
    let a = DMatrix::from_vec(n, n, draw_normals(&mut rng, n * n));
    &a * a.transpose() + DMatrix::identity(n, n) * n as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn uniform_partitions_cover_each_index_once(q in 1usize..9, m in 1usize..9) {
        let n = q * m;
        let p = BlockPartition::make_uniform_1d(n, q).unwrap();
        prop_assert_eq!(p.n_blocks(), m);
        let mut seen = vec![0; n];
        for b in p.blocks() {
            prop_assert_eq!(b.len(), q);
            for &i in b {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|c| *c == 1));
        let owner = p.owner();
        for (j, b) in p.blocks().iter().enumerate() {
            prop_assert!(b.iter().all(|&i| owner[i] == j));
        }
    }

    #[test]
    fn tiles_are_square_and_cover(d in 1usize..5, k in 1usize..5) {
        let side = d * k;
        let p = BlockPartition::make_tiles_2d(side, d).unwrap();
        prop_assert_eq!(p.n_blocks(), k * k);
        prop_assert_eq!(p.dim(), side * side);
        for b in p.blocks() {
            prop_assert_eq!(b.len(), d * d);
            let cols: Vec<usize> = b.iter().map(|i| i % side).collect();
            let rows: Vec<usize> = b.iter().map(|i| i / side).collect();
            prop_assert!(cols.iter().max().unwrap() - cols.iter().min().unwrap() == d - 1);
            prop_assert!(rows.iter().max().unwrap() - rows.iter().min().unwrap() == d - 1);
        }
    }

    #[test]
    fn iact_is_affine_invariant(seed in 0u64..1000, a in 0.1f64..20.0, b in -50.0f64..50.0) {
        let mut rng = chain_rng(seed, 1);
        let z = draw_normals(&mut rng, 600);
        let mut x = 0.0;
        let s: Vec<f64> = z.iter().map(|e| { x = 0.6 * x + e; x }).collect();
        let t: Vec<f64> = s.iter().map(|v| a * v + b).collect();
        let (e1, e2) = (iact(&s).unwrap(), iact(&t).unwrap());
        prop_assert!((e1.iact - e2.iact).abs() < 1e-8 * e1.iact);
        prop_assert_eq!(e1.window, e2.window);
        prop_assert!(e1.iact >= 1.0);
    }

    #[test]
    fn autocovariance_is_bounded_by_variance(seed in 0u64..1000, n in 20usize..300) {
        let mut rng = chain_rng(seed, 2);
        let s = draw_normals(&mut rng, n);
        let g = autocovariance(&s, n / 2).unwrap();
        prop_assert!(g[0] > 0.0);
        prop_assert!(g.iter().all(|v| v.abs() <= g[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn acceptance_probability_is_a_probability(seed in 0u64..500, tau in 1e-4f64..3.0, j in 0usize..4) {
        let t = GaussianTarget::from_covariance(vec![0.5; 8], &exp_cov_1d(8, 0.7), 0.0).unwrap();
        let part = BlockPartition::make_uniform_1d(8, 2).unwrap();
        let mut rng = chain_rng(seed, 3);
        let x = draw_normals(&mut rng, 8);
        let mut state = ChainState::new(&t, x.clone()).unwrap();
        let xi = draw_normals(&mut rng, 2);
        let out = block_update(&t, part.block(j), &mut state, tau, None, &xi, 0.5);
        prop_assert!((0.0..=1.0).contains(&out.alpha));
        // coordinates outside the block never move
        for i in 0..8 {
            if !part.block(j).contains(&i) {
                prop_assert_eq!(state.x[i], x[i]);
            }
        }
        prop_assert_eq!(out.accepted, 0.5 < out.alpha);
    }

    #[test]
    fn metric_proposal_with_identity_matches_plain(seed in 0u64..500, tau in 1e-3f64..2.0) {
        let t = GaussianTarget::from_covariance(vec![0.0; 4], &exp_cov_1d(4, 1.3), 0.0).unwrap();
        let id = Preconditioner::from_dense(&DMatrix::identity(4, 4)).unwrap();
        let mut rng = chain_rng(seed, 4);
        let x = draw_normals(&mut rng, 4);
        let xi = draw_normals(&mut rng, 4);
        let mut a = ChainState::new(&t, x.clone()).unwrap();
        let mut b = ChainState::new(&t, x).unwrap();
        let block = [0, 1, 2, 3];
        let ra = block_update(&t, &block, &mut a, tau, None, &xi, 0.3);
        let rb = block_update(&t, &block, &mut b, tau, Some(&id), &xi, 0.3);
        prop_assert!((ra.alpha - rb.alpha).abs() < 1e-12);
        for (u, v) in a.x.iter().zip(&b.x) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn banded_cholesky_solves(n in 2usize..20, seed in 0u64..200) {
        let a = spd(n, seed);
        let f = BandedCholesky::from_dense(&a).unwrap();
        let mut rng = chain_rng(seed, 5);
        let b = draw_normals(&mut rng, n);
        let x = f.solve(&b);
        let r = &a * nalgebra::DVector::from_column_slice(&x);
        for i in 0..n {
            prop_assert!((r[i] - b[i]).abs() < 1e-9 * (1.0 + b[i].abs()));
        }
        let ld = a.clone().cholesky().unwrap().l().diagonal().map(|v| v.ln()).sum() * 2.0;
        prop_assert!((f.log_det() - ld).abs() < 1e-9 * ld.abs().max(1.0));
    }

    #[test]
    fn csr_matches_dense(n in 1usize..12, seed in 0u64..200) {
        let a = spd(n, seed);
        let c = CsrMatrix::from_dense(&a, 0.0);
        let mut rng = chain_rng(seed, 6);
        let x = draw_normals(&mut rng, n);
        let y = c.mul_vec(&x);
        let yd = &a * nalgebra::DVector::from_column_slice(&x);
        for i in 0..n {
            prop_assert!((y[i] - yd[i]).abs() < 1e-10 * (1.0 + yd[i].abs()));
        }
        prop_assert_eq!(c.to_dense(), a);
    }

    #[test]
    fn margin_never_exceeds_full_concavity(ell in 0.1f64..3.0, qi in 0usize..4) {
        // the H bound is looser than the exact precision: λ_min(−H) ≤ λ_min(P)
        let q = [1, 2, 4, 8][qi];
        let p = spd_inverse(&exp_cov_1d(16, ell)).unwrap();
        let part = BlockPartition::make_uniform_1d(16, q).unwrap();
        let h = build_h_from_precision(&p, &part).unwrap();
        let lmin = p.symmetric_eigenvalues().min();
        prop_assert!(h.margin <= lmin + 1e-9);
    }

    #[test]
    fn chain_csv_round_trips(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 0..20)) {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let mut buf = Vec::new();
        write_chain_csv(&mut buf, &names, &rows, &[("n", rows.len().to_string())]).unwrap();
        let (n2, r2) = read_chain_csv(&buf[..]).unwrap();
        prop_assert_eq!(n2, names);
        prop_assert_eq!(r2, rows);
    }
}
